"""Three-stage training orchestration and candidate ranking.

Stages run separately and sequentially: (1) the pairwise semantic scorer,
(2) the GCN over the structure KB with margin loss, (3) the fusion MLP on
cached, frozen upstream embeddings. Every stage derives its RNG from the
run seed plus a fixed per-stage offset, so a stage retrained in isolation
(e.g. from the CLI) produces exactly the bytes the full run produces.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, replace

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .embed import CharNgramEncoder, NodeEmbeddingMatrix, encode_strings, load_embeddings, random_embeddings, save_embeddings
from .evaluate import AlignmentReport, SplitConfig, alignment_target_ids, rank_order, split_dataset
from .fusion import FusionMlp, train_fusion
from .gcn import GcnModel, MarginLossConfig, gcn_forward, train_gcn
from .graph import build_candidate_adjacency, build_entity_adjacency, normalize
from .kb import CandidateSet, KnowledgeBase, PairSet
from .linalg import AdamState, make_rng, matmul
from .semantic import SemanticScorer, train_semantic


@dataclass
class PipelineConfig:
    d_embed: int = 256
    d_se: int = 128
    sem_hidden: int = 128
    fus_hidden: int = 128
    n_fus_hidden: int = 1
    gcn_layers: int = 1
    gamma: float = 5.0
    moment: int = 1
    k_neg: int = 5
    lr_sem: float = 5e-5
    lr_gcn: float = 1e-5
    lr_fus: float = 1e-4
    epochs_sem: int = 20
    epochs_gcn: int = 50
    epochs_fus: int = 30
    batch_sem: int = 64
    buckets: int = 4096
    init_mode: str = "char_ngram"  # char_ngram | random | file
    use_semantic: bool = True
    use_structure: bool = True
    seed: int = 42
    entity_embeddings: str = ""    # file paths, used when init_mode == "file"
    train_embeddings: str = ""
    eval_embeddings: str = ""

    def __post_init__(self):
        if self.init_mode not in ("char_ngram", "random", "file"):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")
        if self.gcn_layers < 1:
            raise ValueError("gcn_layers must be >= 1")

    def hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


# per-stage RNG offsets; stage reruns are bit-identical to full runs
_RNG_SEM, _RNG_GCN, _RNG_FUS = 11, 12, 13
_RNG_H0_ENT, _RNG_H0_TRAIN, _RNG_H0_EVAL = 101, 102, 103


@dataclass
class TrainedPipeline:
    config: PipelineConfig
    kb: KnowledgeBase
    target_ids: list[int]
    scorer: SemanticScorer
    gcn: GcnModel
    fusion: FusionMlp
    ent_out: np.ndarray  # GCN outputs for all KB entities


def _sample_semantic_pairs(kb: KnowledgeBase, train_cs: CandidateSet,
                           target_ids: list[int], k_neg: int,
                           rng: np.random.Generator):
    surfaces = kb.surfaces()
    pool = np.asarray(target_ids)
    pairs = []
    for c in train_cs.items:
        pairs.append((surfaces[c.gold], c.surface, 1.0))
        for _ in range(k_neg):
            e2 = c.gold
            while e2 == c.gold:
                e2 = int(pool[rng.integers(len(pool))])
            pairs.append((surfaces[e2], c.surface, 0.0))
    return pairs


def _chunk(seq, size):
    return [seq[i : i + size] for i in range(0, len(seq), size)]


def train_stage_semantic(kb: KnowledgeBase, train_cs: CandidateSet,
                         cfg: PipelineConfig) -> tuple[SemanticScorer, list[float]]:
    encoder = CharNgramEncoder(dim=cfg.d_embed, buckets=cfg.buckets, seed=cfg.seed)
    scorer = SemanticScorer(encoder, d_se=cfg.d_se, hidden=cfg.sem_hidden, seed=cfg.seed + 1)
    if not cfg.use_semantic or cfg.epochs_sem == 0:
        return scorer, []
    rng = make_rng(cfg.seed + _RNG_SEM)
    pairs = _sample_semantic_pairs(kb, train_cs, alignment_target_ids(kb), cfg.k_neg, rng)
    rng.shuffle(pairs)
    batches = _chunk(pairs, cfg.batch_sem)
    _, history = train_semantic(scorer, batches, AdamState(lr=cfg.lr_sem), cfg.epochs_sem, rng)
    return scorer, history


def initial_embeddings(cfg: PipelineConfig, scorer: SemanticScorer,
                       strings: list[str], which: str) -> NodeEmbeddingMatrix:
    """H^(0) rows for a node set: encoder output, random, or from file."""
    if cfg.init_mode == "char_ngram":
        return encode_strings(scorer.encoder, strings)
    if cfg.init_mode == "random":
        offset = {"entity": _RNG_H0_ENT, "train": _RNG_H0_TRAIN, "eval": _RNG_H0_EVAL}[which]
        return random_embeddings(make_rng(cfg.seed + offset), len(strings), cfg.d_embed)
    path = {"entity": cfg.entity_embeddings, "train": cfg.train_embeddings,
            "eval": cfg.eval_embeddings}[which]
    if not path:
        raise ValueError(f"init_mode=file needs an embedding path for {which} nodes")
    m = load_embeddings(path, expected_n=len(strings))
    if m.d != cfg.d_embed:
        raise ValueError(f"{path}: dimension {m.d} != configured d_embed {cfg.d_embed}")
    return m


def train_stage_gcn(kb: KnowledgeBase, train_cs: CandidateSet, cfg: PipelineConfig,
                    scorer: SemanticScorer):
    target_ids = alignment_target_ids(kb)
    ent_h0 = initial_embeddings(cfg, scorer, kb.surfaces(), "entity").h
    cand_h0 = initial_embeddings(cfg, scorer, train_cs.surfaces(), "train").h
    ent_prop = normalize(build_entity_adjacency(kb))
    cand_prop = normalize(build_candidate_adjacency(len(train_cs)))
    gcn = GcnModel(dims=[cfg.d_embed] * (cfg.gcn_layers + 1), seed=cfg.seed + 2)
    history: list[float] = []
    if cfg.use_structure and cfg.epochs_gcn > 0:
        positives = PairSet(positives=[(c.gold, c.id) for c in train_cs.items])
        mcfg = MarginLossConfig(gamma=cfg.gamma, moment=cfg.moment, k_neg=cfg.k_neg)
        _, history = train_gcn(gcn, ent_prop, ent_h0, cand_prop, cand_h0,
                               positives, target_ids, mcfg,
                               AdamState(lr=cfg.lr_gcn), cfg.epochs_gcn,
                               make_rng(cfg.seed + _RNG_GCN))
    ent_out = gcn_forward(gcn, ent_prop, ent_h0)
    cand_out = gcn_forward(gcn, cand_prop, cand_h0)
    return gcn, ent_out, cand_out, history


def _semantic_features(scorer: SemanticScorer, u: np.ndarray, v_rows: np.ndarray) -> np.ndarray:
    """Vectorized interaction head: x_se rows for one candidate embedding u
    against many entity embeddings v_rows. Mirrors SemanticScorer._forward."""
    n = v_rows.shape[0]
    u_rows = np.broadcast_to(u, v_rows.shape)
    z = np.concatenate([u_rows, v_rows, np.abs(u_rows - v_rows), u_rows * v_rows], axis=1)
    h1 = np.maximum(matmul(z, scorer.params["W1"]) + scorer.params["b1"], 0.0)
    return np.maximum(matmul(h1, scorer.params["W2"]) + scorer.params["b2"], 0.0)


def build_fusion_examples(kb: KnowledgeBase, train_cs: CandidateSet, cfg: PipelineConfig,
                          scorer: SemanticScorer, ent_out: np.ndarray,
                          cand_out: np.ndarray, rng: np.random.Generator):
    """Cached (x_se, x_st, label) training examples for the fusion stage.

    Negatives mix the hardest wrong entities (highest upstream score for
    the candidate) with uniform draws; easy uniform negatives alone would
    let the fusion ignore whichever channel breaks the ties.
    """
    surfaces = kb.surfaces()
    targets = np.asarray(alignment_target_ids(kb))
    d_st = ent_out.shape[1]
    v_rows = np.stack([scorer.encoder.encode(surfaces[e]) for e in targets])
    n_hard = cfg.k_neg - cfg.k_neg // 2

    examples = []
    for c in train_cs.items:
        u = scorer.encoder.encode(c.surface)
        if cfg.use_semantic:
            x_se_all = _semantic_features(scorer, u, v_rows)
            hard_score = (x_se_all @ scorer.params["w3"][:, 0]) + scorer.params["b3"][0, 0]
        else:
            x_se_all = np.zeros((len(targets), cfg.d_se))
            # fall back to structure proximity for hardness
            hard_score = -np.sum(np.abs(ent_out[targets] - cand_out[c.id]), axis=1)
        order = np.argsort(-hard_score, kind="stable")
        hard = [int(targets[i]) for i in order if int(targets[i]) != c.gold][:n_hard]
        negs = list(hard)
        while len(negs) < cfg.k_neg:
            e2 = int(targets[rng.integers(len(targets))])
            if e2 != c.gold:
                negs.append(e2)
        row_of = {int(e): i for i, e in enumerate(targets)}
        for eid, label in [(c.gold, 1.0)] + [(e, 0.0) for e in negs]:
            x_se = x_se_all[row_of[eid]] if cfg.use_semantic else np.zeros(cfg.d_se)
            x_st = ent_out[eid] * cand_out[c.id] if cfg.use_structure else np.zeros(d_st)
            examples.append((x_se, x_st, label))
    return examples


def train_stage_fusion(kb: KnowledgeBase, train_cs: CandidateSet, cfg: PipelineConfig,
                       scorer: SemanticScorer, ent_out: np.ndarray,
                       cand_out: np.ndarray) -> tuple[FusionMlp, list[float]]:
    rng = make_rng(cfg.seed + _RNG_FUS)
    examples = build_fusion_examples(kb, train_cs, cfg, scorer, ent_out, cand_out, rng)
    fusion = FusionMlp(d_in=cfg.d_se + ent_out.shape[1], hidden=cfg.fus_hidden,
                       n_hidden=cfg.n_fus_hidden, seed=cfg.seed + 3)
    _, history = train_fusion(fusion, examples, AdamState(lr=cfg.lr_fus), cfg.epochs_fus)
    return fusion, history


def train_pipeline(kb: KnowledgeBase, train_cs: CandidateSet,
                   cfg: PipelineConfig) -> TrainedPipeline:
    scorer, _ = train_stage_semantic(kb, train_cs, cfg)
    gcn, ent_out, cand_out, _ = train_stage_gcn(kb, train_cs, cfg, scorer)
    fusion, _ = train_stage_fusion(kb, train_cs, cfg, scorer, ent_out, cand_out)
    return TrainedPipeline(config=cfg, kb=kb, target_ids=alignment_target_ids(kb),
                           scorer=scorer, gcn=gcn, fusion=fusion, ent_out=ent_out)


def rank_candidate(pipe: TrainedPipeline, cand_gcn_row: np.ndarray, surface: str,
                   target_ids: np.ndarray | None = None):
    """Ranked (entity_id, probability) pairs for one candidate."""
    cfg = pipe.config
    targets = np.asarray(pipe.target_ids if target_ids is None else target_ids)
    if cfg.use_semantic:
        u = pipe.scorer.encoder.encode(surface)
        v_rows = np.stack([pipe.scorer.encoder.encode(pipe.kb.entities[e].surface)
                           for e in targets])
        x_se = _semantic_features(pipe.scorer, u, v_rows)
    else:
        x_se = np.zeros((len(targets), cfg.d_se))
    if cfg.use_structure:
        x_st = pipe.ent_out[targets] * cand_gcn_row
    else:
        x_st = np.zeros((len(targets), pipe.ent_out.shape[1]))
    probs, _ = pipe.fusion.forward_batch(np.concatenate([x_se, x_st], axis=1))
    ranked = rank_order(targets, probs)
    prob_of = dict(zip(targets.tolist(), probs.tolist()))
    return ranked, prob_of


def evaluate_candidates(pipe: TrainedPipeline, cand_cs: CandidateSet,
                        which: str = "eval") -> AlignmentReport:
    """Rank every candidate against the target entities; Hits@{1,5,10}."""
    cfg = pipe.config
    cand_h0 = initial_embeddings(cfg, pipe.scorer, cand_cs.surfaces(), which).h
    cand_prop = normalize(build_candidate_adjacency(len(cand_cs)))
    cand_out = gcn_forward(pipe.gcn, cand_prop, cand_h0)
    targets = np.asarray(pipe.target_ids)

    # entity-side encoder rows are shared across candidates
    if cfg.use_semantic:
        v_rows = np.stack([pipe.scorer.encoder.encode(pipe.kb.entities[e].surface)
                           for e in targets])
    report = AlignmentReport(seed=cfg.seed, config_hash=cfg.hash(),
                             entity_ids=targets.tolist())
    for c in cand_cs.items:
        if c.gold is None:
            raise ValueError(f"candidate {c.id} has no gold label")
        if cfg.use_semantic:
            x_se = _semantic_features(pipe.scorer, pipe.scorer.encoder.encode(c.surface), v_rows)
        else:
            x_se = np.zeros((len(targets), cfg.d_se))
        if cfg.use_structure:
            x_st = pipe.ent_out[targets] * cand_out[c.id]
        else:
            x_st = np.zeros((len(targets), pipe.ent_out.shape[1]))
        probs, _ = pipe.fusion.forward_batch(np.concatenate([x_se, x_st], axis=1))
        ranked = rank_order(targets, probs)
        report.rankings.append(ranked)
        report.gold_ranks.append(int(np.where(ranked == c.gold)[0][0]) + 1)
    report.finalize()
    return report


def align_top1(pipe: TrainedPipeline, cand_cs: CandidateSet) -> PairSet:
    """Top-ranked entity per candidate, as an enrichment pair set."""
    cfg = pipe.config
    cand_h0 = initial_embeddings(cfg, pipe.scorer, cand_cs.surfaces(), "eval").h
    cand_out = gcn_forward(pipe.gcn, normalize(build_candidate_adjacency(len(cand_cs))), cand_h0)
    positives = []
    for c in cand_cs.items:
        ranked, _ = rank_candidate(pipe, cand_out[c.id], c.surface)
        positives.append((int(ranked[0]), c.id))
    return PairSet(positives=positives)


# checkpoint plumbing -------------------------------------------------------

def save_pipeline(pipe: TrainedPipeline, ckpt_dir) -> None:
    os.makedirs(ckpt_dir, exist_ok=True)
    save_scorer(pipe.scorer, os.path.join(ckpt_dir, "sem.ckpt"))
    save_gcn(pipe.gcn, os.path.join(ckpt_dir, "gcn.ckpt"))
    save_fusion(pipe.fusion, os.path.join(ckpt_dir, "fusion.ckpt"))


def save_scorer(scorer: SemanticScorer, path) -> None:
    meta = {"d_embed": str(scorer.encoder.dim), "buckets": str(scorer.encoder.buckets),
            "salt": str(scorer.encoder.salt), "d_se": str(scorer.d_se),
            "hidden": str(scorer.hidden)}
    save_checkpoint(path, scorer.params, meta)


def load_scorer(path) -> SemanticScorer:
    meta, params = load_checkpoint(path)
    enc = CharNgramEncoder(dim=int(meta["d_embed"]), buckets=int(meta["buckets"]),
                           salt=int(meta["salt"]), projection=params["proj"])
    return SemanticScorer(enc, d_se=int(meta["d_se"]), hidden=int(meta["hidden"]),
                          params=params)


def save_gcn(gcn: GcnModel, path) -> None:
    params = {f"W{l}": w for l, w in enumerate(gcn.weights)}
    save_checkpoint(path, params, {"dims": " ".join(str(d) for d in gcn.dims)})


def load_gcn(path) -> GcnModel:
    meta, params = load_checkpoint(path)
    dims = [int(d) for d in meta["dims"].split()]
    weights = [params[f"W{l}"] for l in range(len(dims) - 1)]
    return GcnModel(dims=dims, weights=weights)


def save_fusion(fusion: FusionMlp, path) -> None:
    meta = {"d_in": str(fusion.d_in), "hidden": str(fusion.hidden),
            "n_hidden": str(fusion.n_hidden)}
    save_checkpoint(path, fusion.params, meta)


def load_fusion(path) -> FusionMlp:
    meta, params = load_checkpoint(path)
    return FusionMlp(d_in=int(meta["d_in"]), hidden=int(meta["hidden"]),
                     n_hidden=int(meta["n_hidden"]), params=params)


# ablation variants ---------------------------------------------------------

VARIANTS = ("full", "semantic_only", "structure_only", "random_init", "file_init")


def run_variant(kb_full: KnowledgeBase, split_cfg: SplitConfig, base_cfg: PipelineConfig,
                variant: str, seed: int, workdir=None) -> AlignmentReport:
    """One end-to-end run of an ablation variant at the given seed."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    cfg = replace(base_cfg, seed=seed)
    if variant == "semantic_only":
        cfg = replace(cfg, use_structure=False)
    elif variant == "structure_only":
        cfg = replace(cfg, use_semantic=False)
    elif variant == "random_init":
        cfg = replace(cfg, init_mode="random")

    kb, train_cs, _valid, test_cs = split_dataset(kb_full, split_cfg, make_rng(split_cfg.seed))

    if variant == "file_init":
        if workdir is None:
            raise ValueError("file_init variant needs a workdir for embedding files")
        # cold encoder, exported to files: the hot-start-without-fine-tuning analogue
        cold = CharNgramEncoder(dim=cfg.d_embed, buckets=cfg.buckets, seed=seed + 50)
        paths = {}
        for name, strings in (("entity", kb.surfaces()), ("train", train_cs.surfaces()),
                              ("eval", test_cs.surfaces())):
            path = os.path.join(workdir, f"file_init_{seed}_{name}.emb")
            save_embeddings(encode_strings(cold, strings), path)
            paths[name] = path
        cfg = replace(cfg, init_mode="file", entity_embeddings=paths["entity"],
                      train_embeddings=paths["train"], eval_embeddings=paths["eval"])

    pipe = train_pipeline(kb, train_cs, cfg)
    return evaluate_candidates(pipe, test_cs, "eval")
