"""Synthetic terminology KB generator with known gold alignments.

Standards get a random base name; synonyms are derived by perturbations
that imitate how real clinical aliases differ from the standard name:
a parenthetical acronym suffix, token reorder, abbreviation (char
drop), single-char substitution, or an appended measurement word.
Standards additionally hang off generated category nodes via hyponym
triples. Everything is a pure function of the config (seeded).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .kb import Entity, Kind, KnowledgeBase, Relation, Triple, nfc
from .linalg import make_rng

# compact pool of CJK characters so n-gram overlap behaves like the
# clinical strings the pipeline is meant for
DEFAULT_ALPHABET = (
    "血清蛋白素酶糖脂酸钙钠钾氯镁磷铁锌铜细胞红白球压积浓度比容量值"
    "抗原体免疫球圆饱和转移肝肾功能总直接间接胆红固醇甘油三尿酐激"
)

MEASURE_WORDS = ["测定", "检测", "含量", "水平", "值"]

PERTURBATIONS = ("parenthetical", "reorder", "abbreviation", "substitution", "measure")


@dataclass
class SynthConfig:
    n_standards: int = 100
    syn_min: int = 5
    syn_max: int = 5
    # chance a synonym derives from an earlier synonym instead of the base;
    # chained aliases drift from the standard name and make graph structure
    # carry signal the pairwise scorer alone cannot see
    chain_prob: float = 0.5
    # morphemes per base string; bases share morphemes across standards,
    # which makes near-collisions realistic
    morphemes: int = 40
    weights: dict = field(default_factory=lambda: {
        "parenthetical": 0.2,
        "reorder": 0.2,
        "abbreviation": 0.2,
        "substitution": 0.2,
        "measure": 0.2,
    })
    hyponym_fanout: int = 10
    alphabet: str = DEFAULT_ALPHABET
    seed: int = 42

    def __post_init__(self):
        if self.n_standards < 2:
            raise ValueError("need at least 2 standards")
        if not 1 <= self.syn_min <= self.syn_max:
            raise ValueError("bad synonym count range")
        total = sum(self.weights.get(k, 0.0) for k in PERTURBATIONS)
        if abs(total - 1.0) > 1e-9:
            raise ValueError("perturbation weights must sum to 1")


def _make_morphemes(rng, alphabet: str, count: int) -> list[str]:
    pool = set()
    while len(pool) < count:
        m = "".join(alphabet[int(rng.integers(len(alphabet)))] for _ in range(2))
        pool.add(m)
    return sorted(pool)


def _random_base(rng, morphemes: list[str]) -> str:
    n = int(rng.integers(2, 4))
    return "".join(morphemes[int(rng.integers(len(morphemes)))] for _ in range(n))


def _perturb(rng, base: str, kind: str, alphabet: str, acronym: str) -> str:
    if kind == "parenthetical":
        # the acronym is stable per standard, so aliases of one standard
        # share it while the standard surface itself never carries it
        if base.endswith(")"):
            return base  # already parenthesized; caller retries on collision
        return f"{base}({acronym})"
    if kind == "reorder":
        if len(base) < 2:
            kind = "substitution"
        else:
            cut = int(rng.integers(1, len(base)))
            return base[cut:] + base[:cut]
    if kind == "abbreviation":
        if len(base) < 3:
            kind = "substitution"
        else:
            drop = int(rng.integers(len(base)))
            return base[:drop] + base[drop + 1 :]
    if kind == "substitution":
        pos = int(rng.integers(len(base)))
        return base[:pos] + alphabet[int(rng.integers(len(alphabet)))] + base[pos + 1 :]
    if kind == "measure":
        return base + MEASURE_WORDS[int(rng.integers(len(MEASURE_WORDS)))]
    raise ValueError(f"unknown perturbation {kind!r}")


def generate(cfg: SynthConfig) -> tuple[KnowledgeBase, dict[int, list[str]]]:
    """Build a KB and the gold standard-id -> synonym-strings map."""
    rng = make_rng(cfg.seed)
    kinds = list(PERTURBATIONS)
    probs = [cfg.weights[k] for k in kinds]

    morphemes = _make_morphemes(rng, cfg.alphabet, cfg.morphemes)
    used: set[str] = set()
    standards: list[str] = []
    while len(standards) < cfg.n_standards:
        if len(standards) % 2 == 1:
            # sibling standard: share morphemes with the previous one so the
            # two are confusable on surface similarity alone
            prev = standards[-1]
            parts = [prev[i : i + 2] for i in range(0, len(prev), 2)]
            swap = int(rng.integers(len(parts)))
            parts[swap] = morphemes[int(rng.integers(len(morphemes)))]
            rng.shuffle(parts)
            s = nfc("".join(parts))
        else:
            s = nfc(_random_base(rng, morphemes))
        if s not in used:
            used.add(s)
            standards.append(s)

    acronyms: list[str] = []
    acro_used: set[str] = set()
    while len(acronyms) < cfg.n_standards:
        a = "".join(chr(ord("A") + int(rng.integers(26))) for _ in range(int(rng.integers(2, 4))))
        if a not in acro_used:
            acro_used.add(a)
            acronyms.append(a)

    gold: dict[int, list[str]] = {}
    synonyms: list[tuple[int, str]] = []  # (standard id, surface)
    for sid, base in enumerate(standards):
        n_syn = int(rng.integers(cfg.syn_min, cfg.syn_max + 1))
        out: list[str] = []
        while len(out) < n_syn:
            source = base
            if out and rng.random() < cfg.chain_prob:
                source = out[int(rng.integers(len(out)))]
            kind = kinds[int(rng.choice(len(kinds), p=probs))]
            cand = nfc(_perturb(rng, source, kind, cfg.alphabet, acronyms[sid]))
            attempts = 0
            while cand in used and attempts < 20:
                kind = kinds[int(rng.choice(len(kinds), p=probs))]
                cand = nfc(_perturb(rng, source, kind, cfg.alphabet, acronyms[sid]))
                attempts += 1
            if cand in used:
                # salt with an extra char; keeps the shared-n-gram property
                cand = cand + cfg.alphabet[int(rng.integers(len(cfg.alphabet)))]
                if cand in used:
                    continue
            used.add(cand)
            out.append(cand)
        gold[sid] = out
        synonyms.extend((sid, s) for s in out)

    n_categories = math.ceil(cfg.n_standards / cfg.hyponym_fanout)
    categories: list[str] = []
    while len(categories) < n_categories:
        s = nfc(_random_base(rng, cfg.alphabet) + "类")
        if s not in used:
            used.add(s)
            categories.append(s)

    entities: list[Entity] = []
    for s in standards:
        entities.append(Entity(len(entities), s, Kind.STANDARD))
    cat_base = len(entities)
    for s in categories:
        entities.append(Entity(len(entities), s, Kind.STANDARD))
    syn_base = len(entities)
    for _, s in synonyms:
        entities.append(Entity(len(entities), s, Kind.SYNONYM))

    triples: list[Triple] = []
    for sid in range(cfg.n_standards):
        triples.append(Triple(sid, Relation.HYPONYM_OF, cat_base + sid // cfg.hyponym_fanout))
    for i, (sid, _) in enumerate(synonyms):
        triples.append(Triple(syn_base + i, Relation.SYNONYM_OF, sid))

    return KnowledgeBase(entities, triples), gold
