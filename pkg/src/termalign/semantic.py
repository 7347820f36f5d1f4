"""Pairwise semantic scorer: shared char-n-gram encoder + interaction head.

Both strings of a pair go through one shared encoder. With u the
candidate embedding and v the entity embedding, the interaction feature
is [u; v; |u - v|; u * v]; two affine+ReLU layers map it to the semantic
relevancy vector x_se, and an affine+sigmoid head turns x_se into the
synonymy probability. Training minimizes binary cross-entropy.

All gradients are derived by hand; `loss_and_grads` is checked against
central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embed import CharNgramEncoder
from .linalg import AdamState, NumericError, adam_step, glorot_uniform, make_rng

P_CLAMP = 1e-12


def sigmoid(x):
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def bce_loss(p: float, y: float) -> float:
    """-y log p - (1-y) log(1-p), with p clamped into [1e-12, 1-1e-12]."""
    p = min(max(p, P_CLAMP), 1.0 - P_CLAMP)
    return -y * np.log(p) - (1.0 - y) * np.log(1.0 - p)


@dataclass
class SemanticScorer:
    encoder: CharNgramEncoder
    d_se: int = 128
    hidden: int = 128
    seed: int = 0
    params: dict = field(default=None, repr=False)

    def __post_init__(self):
        if self.params is None:
            rng = make_rng(self.seed)
            d = self.encoder.dim
            self.params = {
                "proj": self.encoder.projection,
                "W1": glorot_uniform(rng, 4 * d, self.hidden),
                "b1": np.zeros((1, self.hidden)),
                "W2": glorot_uniform(rng, self.hidden, self.d_se),
                "b2": np.zeros((1, self.d_se)),
                "w3": glorot_uniform(rng, self.d_se, 1),
                "b3": np.zeros((1, 1)),
            }
        else:
            self.encoder.projection = self.params["proj"]

    def _forward(self, entity: str, candidate: str):
        u, cache_u = self.encoder.encode_with_cache(candidate)
        v, cache_v = self.encoder.encode_with_cache(entity)
        z = np.concatenate([u, v, np.abs(u - v), u * v])
        pre1 = z @ self.params["W1"] + self.params["b1"][0]
        h1 = np.maximum(pre1, 0.0)
        pre2 = h1 @ self.params["W2"] + self.params["b2"][0]
        x_se = np.maximum(pre2, 0.0)
        logit = float(x_se @ self.params["w3"][:, 0] + self.params["b3"][0, 0])
        p = float(sigmoid(np.array(logit)))
        return {
            "u": u, "v": v, "cache_u": cache_u, "cache_v": cache_v,
            "z": z, "pre1": pre1, "h1": h1, "pre2": pre2,
            "x_se": x_se, "logit": logit, "p": p,
        }

    def _backward(self, fwd, dlogit: float, grads: dict) -> None:
        d = self.encoder.dim
        g_xse = dlogit * self.params["w3"][:, 0]
        grads["w3"][:, 0] += dlogit * fwd["x_se"]
        grads["b3"][0, 0] += dlogit
        g2 = g_xse * (fwd["pre2"] > 0)
        grads["W2"] += np.outer(fwd["h1"], g2)
        grads["b2"][0] += g2
        g1 = (self.params["W2"] @ g2) * (fwd["pre1"] > 0)
        grads["W1"] += np.outer(fwd["z"], g1)
        grads["b1"][0] += g1
        dz = self.params["W1"] @ g1
        u, v = fwd["u"], fwd["v"]
        sgn = np.sign(u - v)
        du = dz[:d] + dz[2 * d : 3 * d] * sgn + dz[3 * d :] * v
        dv = dz[d : 2 * d] - dz[2 * d : 3 * d] * sgn + dz[3 * d :] * u
        self.encoder.backprop_into(fwd["cache_u"], du, grads["proj"])
        self.encoder.backprop_into(fwd["cache_v"], dv, grads["proj"])

    def zero_grads(self) -> dict:
        return {name: np.zeros_like(p) for name, p in self.params.items()}


def score_pair(model: SemanticScorer, entity: str, candidate: str):
    """Returns (x_se, probability) for an ordered (entity, candidate) pair."""
    fwd = model._forward(entity, candidate)
    return fwd["x_se"], fwd["p"]


def loss_and_grads(model: SemanticScorer, batch: list[tuple[str, str, float]]):
    """Mean BCE over a batch of (entity, candidate, label), plus gradients."""
    grads = model.zero_grads()
    total = 0.0
    inv = 1.0 / len(batch)
    for entity, candidate, y in batch:
        fwd = model._forward(entity, candidate)
        total += bce_loss(fwd["p"], y)
        # d(bce)/d(logit) for sigmoid output is p - y
        model._backward(fwd, inv * (fwd["p"] - y), grads)
    return total * inv, grads


def train_semantic(model: SemanticScorer, batches: list[list[tuple[str, str, float]]],
                   adam: AdamState, epochs: int,
                   rng: np.random.Generator | None = None):
    """Adam over the given batches; returns per-epoch mean loss history.

    Batch order is shuffled each epoch when an rng is given; with a fixed
    seed the whole trajectory is bit-reproducible.
    """
    history = []
    for _ in range(epochs):
        order = list(range(len(batches)))
        if rng is not None:
            rng.shuffle(order)
        epoch_loss = 0.0
        n_pairs = 0
        for i in order:
            loss, grads = loss_and_grads(model, batches[i])
            if not np.isfinite(loss):
                raise NumericError(f"non-finite semantic loss {loss}")
            adam_step(model.params, grads, adam)
            epoch_loss += loss * len(batches[i])
            n_pairs += len(batches[i])
        history.append(epoch_loss / n_pairs)
    return model, history
