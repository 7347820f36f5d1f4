"""Dataset splitting, ranking, Hits@k, and the ablation harness.

Splitting keeps only standards with at least `min_synonyms` synonyms,
divides each standard's synonyms into a KB-structure part and a
candidate part (default 2:8), and divides candidates into
train/valid/test (default 3:2:5). Integer counts come from
largest-remainder apportionment, with at least one synonym forced onto
the structure side.

Ranking targets are the standards that kept at least one structure
synonym; ties in the fused probability break by ascending entity id.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kb import Candidate, CandidateSet, Entity, KbError, KnowledgeBase, Relation, Triple
from .linalg import format_float


@dataclass
class SplitConfig:
    min_synonyms: int = 3
    structure_ratio: tuple[int, int] = (2, 8)
    split_ratio: tuple[int, int, int] = (3, 2, 5)
    seed: int = 42

    def __post_init__(self):
        if self.min_synonyms < 1:
            raise ValueError("min_synonyms must be >= 1")
        if min(self.structure_ratio) < 0 or min(self.split_ratio) < 0:
            raise ValueError("ratios must be non-negative")


def largest_remainder(n: int, ratios) -> list[int]:
    """Apportion n units by the given ratios; leftovers go to the largest
    fractional parts (ties to the earlier part)."""
    total = sum(ratios)
    quotas = [n * r / total for r in ratios]
    counts = [int(q) for q in quotas]
    leftover = n - sum(counts)
    fracs = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in range(leftover):
        counts[fracs[i]] += 1
    return counts


def split_dataset(kb_full: KnowledgeBase, cfg: SplitConfig, rng: np.random.Generator):
    """Returns (structure KB, train, valid, test candidate sets)."""
    syn_of: dict[int, list[int]] = {}
    for t in kb_full.triples:
        if t.relation is Relation.SYNONYM_OF:
            syn_of.setdefault(t.tail, []).append(t.head)

    retained = [e.id for e in kb_full.entities
                if e.kind.value == "standard" and len(syn_of.get(e.id, [])) >= cfg.min_synonyms]
    if not retained:
        raise KbError("no standard has enough synonyms after filtering")
    retained_set = set(retained)
    # standards with no synonyms at all (category nodes) stay as graph context
    context = {e.id for e in kb_full.entities
               if e.kind.value == "standard" and not syn_of.get(e.id)}

    structure_syn: list[int] = []
    assigned: dict[str, list[tuple[int, int]]] = {"train": [], "valid": [], "test": []}
    for sid in retained:
        syns = sorted(syn_of[sid])
        rng.shuffle(syns)
        n_struct, n_cand = largest_remainder(len(syns), cfg.structure_ratio)
        if n_struct == 0:
            n_struct, n_cand = 1, n_cand - 1
        structure_syn.extend(syns[:n_struct])
        cands = syns[n_struct:]
        n_tr, n_va, n_te = largest_remainder(len(cands), cfg.split_ratio)
        assigned["train"].extend((sid, c) for c in cands[:n_tr])
        assigned["valid"].extend((sid, c) for c in cands[n_tr : n_tr + n_va])
        assigned["test"].extend((sid, c) for c in cands[n_tr + n_va :])

    keep = retained_set | context | set(structure_syn)
    old_to_new: dict[int, int] = {}
    entities: list[Entity] = []
    for e in kb_full.entities:
        if e.id in keep:
            old_to_new[e.id] = len(entities)
            entities.append(Entity(len(entities), e.surface, e.kind))
    triples = [
        Triple(old_to_new[t.head], t.relation, old_to_new[t.tail])
        for t in kb_full.triples
        if t.head in keep and t.tail in keep
    ]
    structure_kb = KnowledgeBase(entities, triples)

    def to_candidates(pairs: list[tuple[int, int]]) -> CandidateSet:
        items = [
            Candidate(i, kb_full.entities[syn].surface, old_to_new[sid])
            for i, (sid, syn) in enumerate(pairs)
        ]
        return CandidateSet(items)

    return (structure_kb,
            to_candidates(assigned["train"]),
            to_candidates(assigned["valid"]),
            to_candidates(assigned["test"]))


def alignment_target_ids(kb: KnowledgeBase) -> list[int]:
    """Standards that anchor at least one synonym in the structure KB."""
    tails = {t.tail for t in kb.triples if t.relation is Relation.SYNONYM_OF}
    return [e.id for e in kb.entities if e.kind.value == "standard" and e.id in tails]


def rank_order(entity_ids: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Entity ids sorted by probability desc, ties by ascending id."""
    order = np.lexsort((entity_ids, -probs))
    return entity_ids[order]


def hits_at_k(gold_ranks: list[int], k: int) -> float:
    """Percentage of candidates whose gold entity ranks within the top k."""
    if not gold_ranks:
        raise ValueError("no gold ranks")
    return 100.0 * sum(1 for r in gold_ranks if r <= k) / len(gold_ranks)


@dataclass
class AlignmentReport:
    seed: int
    config_hash: str
    entity_ids: list[int]                      # ranking target pool
    rankings: list[np.ndarray] = field(default_factory=list)   # per candidate
    gold_ranks: list[int] = field(default_factory=list)        # 1-based
    hits: dict[int, float] = field(default_factory=dict)

    def finalize(self) -> None:
        self.hits = {k: hits_at_k(self.gold_ranks, k) for k in (1, 5, 10)}


def save_report(report: AlignmentReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# seed={report.seed} config={report.config_hash}\n")
        fh.write("HITS\t1\t{}\t5\t{}\t10\t{}\n".format(
            format_float(report.hits[1]), format_float(report.hits[5]),
            format_float(report.hits[10])))
        for cid, (ranked, gr) in enumerate(zip(report.rankings, report.gold_ranks)):
            top10 = ",".join(str(int(e)) for e in ranked[:10])
            fh.write(f"R\t{cid}\t{gr}\t{top10}\n")


def median(values: list[float]) -> float:
    return float(np.median(np.asarray(values, dtype=np.float64)))


def run_ablation(kb_full: KnowledgeBase, split_cfg: SplitConfig, base_config,
                 variants: list[str], seeds: list[int], workdir=None):
    """Train/evaluate each variant over the seed list; median Hits@k rows.

    Variants: full, semantic_only, structure_only, random_init, file_init.
    Returns a list of (variant, {k: median hits}) in input order.
    """
    from . import pipeline  # local import; pipeline depends on this module

    rows = []
    for variant in variants:
        per_seed = {1: [], 5: [], 10: []}
        for seed in seeds:
            report = pipeline.run_variant(kb_full, split_cfg, base_config, variant,
                                          seed, workdir=workdir)
            for k in (1, 5, 10):
                per_seed[k].append(report.hits[k])
        rows.append((variant, {k: median(v) for k, v in per_seed.items()}))
    return rows
