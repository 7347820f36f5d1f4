import math

import numpy as np
import pytest

from termalign.embed import CharNgramEncoder
from termalign.linalg import AdamState, finite_diff_grad, make_rng
from termalign.semantic import SemanticScorer, bce_loss, loss_and_grads, score_pair, train_semantic


def tiny_scorer(seed=0, dim=6, d_se=4, hidden=5):
    enc = CharNgramEncoder(dim=dim, buckets=64, seed=seed)
    return SemanticScorer(enc, d_se=d_se, hidden=hidden, seed=seed)


def random_batch(rng, n_pairs=3):
    alphabet = "血清蛋白素酶糖钙abk"
    batch = []
    for _ in range(n_pairs):
        a = "".join(rng.choice(list(alphabet), size=rng.integers(2, 6)))
        b = "".join(rng.choice(list(alphabet), size=rng.integers(2, 6)))
        batch.append((a, b, float(rng.integers(2))))
    return batch


class TestBceLoss:
    def test_confident_correct(self):
        assert bce_loss(1.0 - 1e-12, 1.0) == pytest.approx(0.0, abs=1e-11)

    def test_half(self):
        assert bce_loss(0.5, 1.0) == pytest.approx(math.log(2), abs=1e-12)

    def test_confident_wrong(self):
        assert bce_loss(0.9, 0.0) == pytest.approx(-math.log(0.1), abs=1e-12)

    def test_finite_at_extremes(self):
        assert math.isfinite(bce_loss(0.0, 1.0))
        assert math.isfinite(bce_loss(1.0, 0.0))


class TestScorePair:
    def test_probability_in_open_interval(self):
        model = tiny_scorer()
        for pair in [("血清", "血清总蛋白"), ("a", "b"), ("x", "x")]:
            _, p = score_pair(model, *pair)
            assert 0.0 < p < 1.0

    def test_identical_strings_feature_facts(self):
        model = tiny_scorer()
        fwd = model._forward("血清", "血清")
        d = model.encoder.dim
        assert np.array_equal(fwd["z"][2 * d : 3 * d], np.zeros(d))  # |u - v| = 0
        assert np.array_equal(fwd["z"][3 * d :], fwd["u"] * fwd["u"])

    def test_slots_are_ordered(self):
        # the pair feature places the candidate in the u slot and the entity
        # in the v slot, so swapping arguments may change the output
        model = tiny_scorer(seed=3)
        _, p_ab = score_pair(model, "血清", "钙素")
        _, p_ba = score_pair(model, "钙素", "血清")
        assert p_ab != p_ba

    def test_deterministic(self):
        model = tiny_scorer()
        x1, p1 = score_pair(model, "a", "b")
        x2, p2 = score_pair(model, "a", "b")
        assert p1 == p2
        assert np.array_equal(x1, x2)


class TestGradients:
    @pytest.mark.parametrize("trial", range(20))
    def test_matches_finite_differences(self, trial):
        rng = make_rng(100 + trial)
        model = tiny_scorer(seed=trial)
        # move off the zero-bias ReLU kinks so the loss is smooth locally
        for p in model.params.values():
            p += rng.normal(scale=0.1, size=p.shape)
        batch = random_batch(rng)
        _, grads = loss_and_grads(model, batch)
        for name in model.params:
            param = model.params[name]

            def loss_at(x, _n=name, _p=param):
                saved = _p.copy()
                _p[...] = x
                loss, _ = loss_and_grads(model, batch)
                _p[...] = saved
                return loss

            fd = finite_diff_grad(loss_at, param.copy(), h=1e-5)
            scale = max(np.max(np.abs(fd)), np.max(np.abs(grads[name])), 1e-8)
            assert np.max(np.abs(fd - grads[name])) / scale < 1e-4, name


class TestTrainSemantic:
    def test_zero_epochs_noop(self):
        model = tiny_scorer()
        before = {k: v.copy() for k, v in model.params.items()}
        _, history = train_semantic(model, [[("a", "b", 1.0)]], AdamState(), 0)
        assert history == []
        for k in before:
            assert np.array_equal(model.params[k], before[k])

    def test_overfits_single_pair(self):
        model = tiny_scorer(seed=1)
        batch = [("血清总蛋白", "血清蛋白", 1.0)]
        _, h0 = train_semantic(model, [batch], AdamState(lr=1e-2), 1)
        _, hist = train_semantic(model, [batch], AdamState(lr=1e-2), 200)
        assert hist[-1] < h0[0]

    def test_reproducible_history(self):
        rng_batch = make_rng(2)
        batch = random_batch(rng_batch, n_pairs=8)
        batches = [batch[:4], batch[4:]]
        _, h1 = train_semantic(tiny_scorer(seed=5), batches, AdamState(lr=1e-3), 5, make_rng(9))
        _, h2 = train_semantic(tiny_scorer(seed=5), batches, AdamState(lr=1e-3), 5, make_rng(9))
        assert h1 == h2

    def test_loss_decreases_on_corpus(self):
        rng = make_rng(3)
        batch = random_batch(rng, n_pairs=32)
        # relabel so positives are string pairs sharing a prefix
        batch = [(a, a + "测定", 1.0) for a, _, _ in batch[:16]] + \
                [(a, b, 0.0) for a, b, _ in batch[16:] if a != b]
        model = tiny_scorer(seed=7, dim=16)
        _, hist = train_semantic(model, [batch], AdamState(lr=5e-3), 40, make_rng(4))
        assert hist[-1] < 0.5 * hist[0]
