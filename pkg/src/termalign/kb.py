"""Terminology KB domain types and tab-separated file ingestion.

Entities carry dense integer ids assigned in first-appearance order.
Surface strings are NFC-normalized once, at construction, and compared by
exact byte equality afterwards.

Relation direction: (head, synonym_of, tail) means head is a synonym of
tail; (head, hyponym_of, tail) means head belongs to the category tail.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from enum import Enum


class KbError(ValueError):
    """Malformed KB, candidate, or pair data."""


class Relation(str, Enum):
    SYNONYM_OF = "synonym_of"
    HYPONYM_OF = "hyponym_of"


class Kind(str, Enum):
    STANDARD = "standard"
    SYNONYM = "synonym"


def nfc(s: str) -> str:
    return unicodedata.normalize("NFC", s)


@dataclass(frozen=True)
class Entity:
    id: int
    surface: str
    kind: Kind


@dataclass(frozen=True)
class Triple:
    head: int
    relation: Relation
    tail: int

    def __post_init__(self):
        if self.head == self.tail:
            raise KbError(f"self-loop triple on entity {self.head}")


@dataclass
class KnowledgeBase:
    entities: list[Entity]
    triples: list[Triple]

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        ids = [e.id for e in self.entities]
        if ids != list(range(len(ids))):
            raise KbError("entity ids must be dense 0..n-1 in order")
        n = len(ids)
        seen = set()
        syn_heads = set()
        for t in self.triples:
            if not (0 <= t.head < n and 0 <= t.tail < n):
                raise KbError(f"triple references unknown entity: {t}")
            key = (t.head, t.relation, t.tail)
            if key in seen:
                raise KbError(f"duplicate triple: {t}")
            seen.add(key)
            if t.relation is Relation.SYNONYM_OF:
                syn_heads.add(t.head)
        for e in self.entities:
            if e.kind is Kind.SYNONYM and e.id not in syn_heads:
                raise KbError(f"synonym entity {e.id} ({e.surface}) heads no synonym_of triple")

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    def standard_ids(self) -> list[int]:
        return [e.id for e in self.entities if e.kind is Kind.STANDARD]

    def surfaces(self) -> list[str]:
        return [e.surface for e in self.entities]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, KnowledgeBase)
            and self.entities == other.entities
            and self.triples == other.triples
        )


@dataclass(frozen=True)
class Candidate:
    id: int
    surface: str
    gold: int | None = None


@dataclass
class CandidateSet:
    items: list[Candidate]

    def __post_init__(self):
        ids = [c.id for c in self.items]
        if ids != list(range(len(ids))):
            raise KbError("candidate ids must be dense 0..m-1 in order")

    def __len__(self) -> int:
        return len(self.items)

    def surfaces(self) -> list[str]:
        return [c.surface for c in self.items]


@dataclass
class PairSet:
    positives: list[tuple[int, int]] = field(default_factory=list)
    negatives: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        overlap = set(self.positives) & set(self.negatives)
        if overlap:
            raise KbError(f"pairs appear as both positive and negative: {sorted(overlap)[:3]}")


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line


def load_kb(path) -> KnowledgeBase:
    """Parse the KB file format (E and T sections) into a validated KB."""
    entities = []
    triples = []
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        tag = parts[0]
        if tag == "E":
            if len(parts) != 4:
                raise KbError(f"{path}:{lineno}: entity line needs 4 fields, got {len(parts)}")
            try:
                eid = int(parts[1])
                kind = Kind(parts[2])
            except ValueError as exc:
                raise KbError(f"{path}:{lineno}: {exc}") from exc
            if eid != len(entities):
                raise KbError(f"{path}:{lineno}: entity id {eid} out of order (expected {len(entities)})")
            entities.append(Entity(eid, nfc(parts[3]), kind))
        elif tag == "T":
            if len(parts) != 4:
                raise KbError(f"{path}:{lineno}: triple line needs 4 fields, got {len(parts)}")
            try:
                rel = Relation(parts[2])
            except ValueError as exc:
                raise KbError(f"{path}:{lineno}: unknown relation {parts[2]!r}") from exc
            try:
                triples.append(Triple(int(parts[1]), rel, int(parts[3])))
            except (ValueError, KbError) as exc:
                raise KbError(f"{path}:{lineno}: {exc}") from exc
        else:
            raise KbError(f"{path}:{lineno}: unknown line tag {tag!r}")
    try:
        return KnowledgeBase(entities, triples)
    except KbError as exc:
        raise KbError(f"{path}: {exc}") from exc


def save_kb(kb: KnowledgeBase, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# terminology KB\n")
        for e in kb.entities:
            fh.write(f"E\t{e.id}\t{e.kind.value}\t{e.surface}\n")
        for t in kb.triples:
            fh.write(f"T\t{t.head}\t{t.relation.value}\t{t.tail}\n")


def load_candidates(path, kb: KnowledgeBase | None = None) -> CandidateSet:
    """Parse the candidate file; gold ids, when given, must name standards."""
    items = []
    standards = set(kb.standard_ids()) if kb is not None else None
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if parts[0] != "C" or len(parts) not in (3, 4):
            raise KbError(f"{path}:{lineno}: bad candidate line")
        cid = int(parts[1])
        if cid != len(items):
            raise KbError(f"{path}:{lineno}: candidate id {cid} out of order")
        gold = int(parts[3]) if len(parts) == 4 else None
        if gold is not None and standards is not None and gold not in standards:
            raise KbError(f"{path}:{lineno}: gold id {gold} is not a standard entity")
        items.append(Candidate(cid, nfc(parts[2]), gold))
    return CandidateSet(items)


def save_candidates(cs: CandidateSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# candidate terminologies\n")
        for c in cs.items:
            if c.gold is None:
                fh.write(f"C\t{c.id}\t{c.surface}\n")
            else:
                fh.write(f"C\t{c.id}\t{c.surface}\t{c.gold}\n")


def load_alignments(path) -> PairSet:
    positives = []
    negatives = []
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if parts[0] != "P" or len(parts) != 4 or parts[3] not in ("pos", "neg"):
            raise KbError(f"{path}:{lineno}: bad pair line")
        pair = (int(parts[1]), int(parts[2]))
        (positives if parts[3] == "pos" else negatives).append(pair)
    return PairSet(positives, negatives)


def save_alignments(pairs: PairSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# aligned (entity, candidate) pairs\n")
        for e, c in pairs.positives:
            fh.write(f"P\t{e}\t{c}\tpos\n")
        for e, c in pairs.negatives:
            fh.write(f"P\t{e}\t{c}\tneg\n")
