import numpy as np
import pytest

from termalign.embed import (CharNgramEncoder, NodeEmbeddingMatrix, encode_strings, fnv1a64,
                             load_embeddings, random_embeddings, save_embeddings)
from termalign.linalg import make_rng


def ngram_set(s):
    chars = list(s)
    return set(chars) | {a + b for a, b in zip(chars, chars[1:])}


class TestEncoder:
    def test_empty_string_zero_row(self):
        enc = CharNgramEncoder(dim=16)
        assert np.array_equal(enc.encode(""), np.zeros(16))

    def test_deterministic(self):
        enc = CharNgramEncoder(dim=16, salt=3)
        assert np.array_equal(enc.encode("泌乳素"), enc.encode("泌乳素"))

    def test_identical_strings_identical_rows(self):
        enc = CharNgramEncoder(dim=16)
        m = encode_strings(enc, ["血清", "血清"])
        assert np.array_equal(m.h[0], m.h[1])

    def test_nonzero_rows_unit_norm(self):
        enc = CharNgramEncoder(dim=32)
        m = encode_strings(enc, ["催乳素", "a", "泌乳素测定"])
        norms = np.linalg.norm(m.h, axis=1)
        assert np.all(np.abs(norms - 1.0) <= 1e-12)

    def test_shared_ngrams_raise_similarity(self):
        # oracle: "泌乳素" and "催乳素" share the 2-gram 乳素 and 1-grams 乳/素,
        # "血红蛋白" shares nothing; cosine should usually follow the overlap
        assert len(ngram_set("泌乳素") & ngram_set("催乳素")) == 3
        assert len(ngram_set("泌乳素") & ngram_set("血红蛋白")) == 0
        wins = 0
        for seed in range(20):
            enc = CharNgramEncoder(dim=64, seed=seed)
            a = enc.encode("泌乳素")
            sim_related = float(a @ enc.encode("催乳素"))
            sim_unrelated = float(a @ enc.encode("血红蛋白"))
            wins += sim_related > sim_unrelated
        assert wins > 10

    def test_hash_is_platform_stable(self):
        # frozen values pin the salted FNV-1a implementation
        assert fnv1a64(b"") == 0xAF63BD4C8601B7DF
        assert fnv1a64("乳素".encode("utf-8")) == 0xAC2CB395C00780D6
        assert fnv1a64(b"abc", salt=7) != fnv1a64(b"abc", salt=8)


class TestRandomEmbeddings:
    def test_same_seed_identical(self):
        a = random_embeddings(make_rng(5), 10, 8)
        b = random_embeddings(make_rng(5), 10, 8)
        assert np.array_equal(a.h, b.h)
        assert a.source == "random"

    def test_different_seed_differs(self):
        a = random_embeddings(make_rng(5), 10, 8)
        b = random_embeddings(make_rng(6), 10, 8)
        assert not np.array_equal(a.h, b.h)

    def test_mean_near_zero(self):
        m = random_embeddings(make_rng(7), 1000, 100)
        assert -0.001 <= float(m.h.mean()) <= 0.001

    def test_range(self):
        m = random_embeddings(make_rng(8), 50, 20)
        assert np.all(np.abs(m.h) <= 0.05)


class TestEmbeddingFile:
    def test_small_round_trip(self, tmp_path):
        m = NodeEmbeddingMatrix(make_rng(1).normal(size=(2, 4)), "file")
        save_embeddings(m, tmp_path / "e.txt")
        got = load_embeddings(tmp_path / "e.txt", expected_n=2)
        assert np.array_equal(got.h, m.h)

    def test_dimension_mismatch_names_line(self, tmp_path):
        (tmp_path / "bad.txt").write_text("2 4\n0\t1 2 3\n1\t1 2 3 4\n", encoding="utf-8")
        with pytest.raises(ValueError, match=":2"):
            load_embeddings(tmp_path / "bad.txt")

    def test_count_mismatch(self, tmp_path):
        m = NodeEmbeddingMatrix(np.zeros((3, 2)), "file")
        save_embeddings(m, tmp_path / "e.txt")
        with pytest.raises(ValueError, match="expected 5"):
            load_embeddings(tmp_path / "e.txt", expected_n=5)

    def test_nonfinite_rejected(self, tmp_path):
        (tmp_path / "bad.txt").write_text("1 2\n0\tnan 1.0\n", encoding="utf-8")
        with pytest.raises(ValueError, match="non-finite"):
            load_embeddings(tmp_path / "bad.txt")

    def test_high_dim_format(self, tmp_path):
        # 768-wide rows, the dimension an external transformer exporter emits
        m = NodeEmbeddingMatrix(make_rng(2).normal(size=(10, 768)), "file")
        save_embeddings(m, tmp_path / "wide.txt")
        got = load_embeddings(tmp_path / "wide.txt", expected_n=10)
        assert got.d == 768
        assert np.array_equal(got.h, m.h)
