import pytest

from termalign.kb import (Candidate, CandidateSet, Entity, KbError, Kind, KnowledgeBase,
                          PairSet, Relation, Triple, load_alignments, load_candidates,
                          load_kb, save_alignments, save_candidates, save_kb)
from termalign.linalg import make_rng


def small_kb():
    return KnowledgeBase(
        entities=[Entity(0, "血红蛋白", Kind.STANDARD), Entity(1, "血色素", Kind.SYNONYM)],
        triples=[Triple(1, Relation.SYNONYM_OF, 0)],
    )


class TestLoadKb:
    def test_minimal_file(self, tmp_path):
        path = tmp_path / "kb.tsv"
        path.write_text("E\t0\tstandard\t血红蛋白\nE\t1\tsynonym\t血色素\n"
                        "T\t1\tsynonym_of\t0\n", encoding="utf-8")
        kb = load_kb(path)
        assert kb.n_entities == 2
        assert kb.triples == [Triple(1, Relation.SYNONYM_OF, 0)]

    def test_unknown_relation_reports_line(self, tmp_path):
        path = tmp_path / "kb.tsv"
        path.write_text("E\t0\tstandard\ta\nE\t1\tstandard\tb\n"
                        "T\t0\tsibling_of\t1\n", encoding="utf-8")
        with pytest.raises(KbError, match=r":3.*sibling_of"):
            load_kb(path)

    def test_duplicate_triple_rejected(self, tmp_path):
        path = tmp_path / "kb.tsv"
        path.write_text("E\t0\tstandard\ta\nE\t1\tsynonym\tb\n"
                        "T\t1\tsynonym_of\t0\nT\t1\tsynonym_of\t0\n", encoding="utf-8")
        with pytest.raises(KbError, match="duplicate"):
            load_kb(path)

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "kb.tsv"
        path.write_text("# header\n\nE\t0\tstandard\ta\n\nE\t1\tsynonym\tb\n"
                        "T\t1\tsynonym_of\t0\n", encoding="utf-8")
        assert load_kb(path).n_entities == 2

    def test_nfc_normalization_applied(self, tmp_path):
        # U+FF21 fullwidth A stays as-is under NFC, but decomposed e + combining
        # accent must compose
        path = tmp_path / "kb.tsv"
        decomposed = "éx"
        path.write_text(f"E\t0\tstandard\t{decomposed}\nE\t1\tsynonym\ty\n"
                        "T\t1\tsynonym_of\t0\n", encoding="utf-8")
        assert load_kb(path).entities[0].surface == "éx"

    def test_reference_shape_counts(self, tmp_path):
        # 743 standards + 1,212 synonyms; 1,486 hyponym + 1,212 synonym triples
        lines = []
        for i in range(743):
            lines.append(f"E\t{i}\tstandard\tstd{i}")
        for j in range(1212):
            lines.append(f"E\t{743 + j}\tsynonym\tsyn{j}")
        for j in range(1212):
            lines.append(f"T\t{743 + j}\tsynonym_of\t{j % 743}")
        for i in range(743):
            lines.append(f"T\t{i}\thyponym_of\t{(i + 1) % 743}")
            lines.append(f"T\t{i}\thyponym_of\t{(i + 2) % 743}")
        path = tmp_path / "big.tsv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        kb = load_kb(path)
        assert sum(1 for e in kb.entities if e.kind is Kind.STANDARD) == 743
        assert sum(1 for e in kb.entities if e.kind is Kind.SYNONYM) == 1212
        assert sum(1 for t in kb.triples if t.relation is Relation.HYPONYM_OF) == 1486
        assert sum(1 for t in kb.triples if t.relation is Relation.SYNONYM_OF) == 1212


class TestValidation:
    def test_self_loop_rejected(self):
        with pytest.raises(KbError):
            Triple(0, Relation.SYNONYM_OF, 0)

    def test_dangling_reference(self):
        with pytest.raises(KbError):
            KnowledgeBase([Entity(0, "a", Kind.STANDARD)],
                          [Triple(0, Relation.HYPONYM_OF, 5)])

    def test_synonym_without_triple(self):
        with pytest.raises(KbError):
            KnowledgeBase([Entity(0, "a", Kind.STANDARD), Entity(1, "b", Kind.SYNONYM)], [])


class TestRoundTrips:
    def test_kb_round_trip(self, tmp_path):
        kb = small_kb()
        save_kb(kb, tmp_path / "kb.tsv")
        assert load_kb(tmp_path / "kb.tsv") == kb

    def test_random_kbs_round_trip(self, tmp_path):
        rng = make_rng(5)
        for trial in range(20):
            n_std = int(rng.integers(2, 8))
            entities = [Entity(i, f"s{i}x{int(rng.integers(1000))}", Kind.STANDARD)
                        for i in range(n_std)]
            triples = []
            for _ in range(int(rng.integers(1, 4))):
                syn = len(entities)
                std = int(rng.integers(n_std))
                entities.append(Entity(syn, f"y{syn}v{int(rng.integers(1000))}", Kind.SYNONYM))
                triples.append(Triple(syn, Relation.SYNONYM_OF, std))
            kb = KnowledgeBase(entities, triples)
            path = tmp_path / f"kb{trial}.tsv"
            save_kb(kb, path)
            assert load_kb(path) == kb

    def test_candidates_round_trip(self, tmp_path):
        kb = small_kb()
        cs = CandidateSet([Candidate(0, "血色素测定", 0), Candidate(1, "nolabel")])
        save_candidates(cs, tmp_path / "c.tsv")
        assert load_candidates(tmp_path / "c.tsv", kb) == cs

    def test_candidate_gold_must_be_standard(self, tmp_path):
        (tmp_path / "c.tsv").write_text("C\t0\tx\t1\n", encoding="utf-8")
        with pytest.raises(KbError, match="not a standard"):
            load_candidates(tmp_path / "c.tsv", small_kb())


class TestAlignments:
    def test_empty_pairset_header_only(self, tmp_path):
        save_alignments(PairSet(), tmp_path / "p.tsv")
        text = (tmp_path / "p.tsv").read_text(encoding="utf-8")
        assert text.startswith("#")
        assert "P\t" not in text

    def test_single_pair_round_trip(self, tmp_path):
        pairs = PairSet(positives=[(0, 0)])
        save_alignments(pairs, tmp_path / "p.tsv")
        assert load_alignments(tmp_path / "p.tsv") == pairs

    def test_many_random_pairs_round_trip(self, tmp_path):
        rng = make_rng(11)
        seen = set()
        pos, neg = [], []
        while len(pos) + len(neg) < 1000:
            pair = (int(rng.integers(500)), int(rng.integers(500)))
            if pair in seen:
                continue
            seen.add(pair)
            (pos if rng.random() < 0.5 else neg).append(pair)
        pairs = PairSet(pos, neg)
        save_alignments(pairs, tmp_path / "p.tsv")
        assert load_alignments(tmp_path / "p.tsv") == pairs

    def test_pos_neg_overlap_rejected(self):
        with pytest.raises(KbError):
            PairSet(positives=[(1, 2)], negatives=[(1, 2)])
