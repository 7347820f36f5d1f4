"""Fusion MLP: forward values, gradient check, training, upstream isolation."""

import numpy as np
import pytest

from termalign.fusion import FusionMlp, fuse, fusion_loss_and_grads, train_fusion
from termalign.linalg import AdamState, ShapeError, finite_diff_grad, make_rng


def test_zero_weights_give_half_probability():
    model = FusionMlp(d_in=4, hidden=3, seed=0)
    for name in model.params:
        model.params[name][:] = 0.0
    p, _ = model.forward_batch(np.ones((2, 4)))
    assert np.array_equal(p, np.array([0.5, 0.5]))


def test_forward_hand_computed():
    # one hidden level, all weight matrices set to known values
    model = FusionMlp(d_in=2, hidden=2, seed=0)
    model.params["W0"] = np.array([[1.0, -1.0], [0.0, 1.0]])
    model.params["b0"] = np.array([[0.5, 0.0]])
    model.params["Wh0"] = np.eye(2)
    model.params["bh0"] = np.zeros((1, 2))
    model.params["Wf"] = np.array([[1.0], [2.0]])
    model.params["bf"] = np.array([[-1.0]])
    x = np.array([[1.0, 1.0]])
    # a = [1*1+0*1+0.5, -1*1+1*1+0] = [1.5, 0]; relu -> [1.5, 0]
    # b = identity -> [1.5, 0]; relu -> [1.5, 0]
    # logit = 1.5*1 + 0*2 - 1 = 0.5
    p, _ = model.forward_batch(x)
    assert p[0] == pytest.approx(1.0 / (1.0 + np.exp(-0.5)))


def test_fuse_matches_forward_batch():
    model = FusionMlp(d_in=6, hidden=4, seed=1)
    rng = make_rng(2)
    x_se, x_st = rng.normal(size=3), rng.normal(size=3)
    p, _ = model.forward_batch(np.concatenate([x_se, x_st])[None, :])
    assert fuse(model, x_se, x_st) == p[0]


def test_input_dim_checked():
    model = FusionMlp(d_in=4, hidden=3, seed=0)
    with pytest.raises(ShapeError):
        model.forward_batch(np.zeros((1, 5)))


@pytest.mark.parametrize("n_hidden", [1, 2])
def test_gradient_matches_finite_difference(n_hidden):
    rng = make_rng(40 + n_hidden)
    for trial in range(5):
        model = FusionMlp(d_in=5, hidden=4, n_hidden=n_hidden, seed=trial)
        # move off the zero-bias ReLU kinks before probing
        for name in model.params:
            model.params[name] += rng.normal(scale=0.1, size=model.params[name].shape)
        x = rng.normal(size=(6, 5))
        y = (rng.random(6) < 0.5).astype(np.float64)
        _, grads = fusion_loss_and_grads(model, x, y)
        for name in model.params:
            def loss_of(w, name=name):
                saved = model.params[name]
                model.params[name] = w
                val, _ = fusion_loss_and_grads(model, x, y)
                model.params[name] = saved
                return val
            fd = finite_diff_grad(loss_of, model.params[name].copy(), h=1e-5)
            rel = np.linalg.norm(grads[name] - fd) / max(np.linalg.norm(fd), 1e-8)
            assert rel < 1e-4, f"trial {trial} param {name}: rel err {rel}"


def test_overfits_small_separable_batch():
    rng = make_rng(6)
    examples = []
    for i in range(8):
        label = float(i % 2)
        se = rng.normal(size=3) + (2.0 if label else -2.0)
        st = rng.normal(size=3)
        examples.append((se, st, label))
    model = FusionMlp(d_in=6, hidden=8, seed=0)
    model, history = train_fusion(model, examples, AdamState(lr=1e-2), 300)
    assert history[-1] < 0.05 < history[0]
    for se, st, label in examples:
        p = fuse(model, se, st)
        assert (p > 0.9) == bool(label)


def test_zero_epochs_is_noop():
    model = FusionMlp(d_in=4, hidden=3, seed=0)
    before = {k: v.copy() for k, v in model.params.items()}
    _, history = train_fusion(model, [(np.zeros(2), np.zeros(2), 1.0)], AdamState(), 0)
    assert history == []
    for k in before:
        assert np.array_equal(model.params[k], before[k])


def test_training_leaves_inputs_untouched():
    # the fusion stage consumes cached upstream features and must not write them
    rng = make_rng(7)
    examples = [(rng.normal(size=3), rng.normal(size=3), float(i % 2)) for i in range(6)]
    frozen = [(se.copy(), st.copy()) for se, st, _ in examples]
    model = FusionMlp(d_in=6, hidden=4, seed=0)
    train_fusion(model, examples, AdamState(lr=1e-2), 20)
    for (se, st, _), (se0, st0) in zip(examples, frozen):
        assert np.array_equal(se, se0)
        assert np.array_equal(st, st0)


def test_training_is_reproducible():
    rng = make_rng(8)
    examples = [(rng.normal(size=2), rng.normal(size=2), float(i % 2)) for i in range(4)]
    hists = []
    finals = []
    for _ in range(2):
        model = FusionMlp(d_in=4, hidden=3, seed=9)
        model, hist = train_fusion(model, examples, AdamState(lr=1e-3), 15)
        hists.append(hist)
        finals.append({k: v.copy() for k, v in model.params.items()})
    assert hists[0] == hists[1]
    for k in finals[0]:
        assert np.array_equal(finals[0][k], finals[1][k])
