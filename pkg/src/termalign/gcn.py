"""Graph-convolutional structure embedding with margin-based training.

One stack of weights serves both graphs: entity nodes propagate through
the normalized entity adjacency, candidate nodes through the identity
(their adjacency is all-zero). Layer rule per level l:

    H^(l+1) = act( L_hat @ H^(l) @ W^(l) )

with ReLU on every layer except the last, which stays linear. Training
pulls positive (entity, candidate) output rows together and pushes
sampled negatives at least `gamma` apart under the chosen moment of the
distance (1 -> L1, 2 -> L2). The structure relevancy embedding of a pair
is the element-wise product of the two output rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import PropagationMatrix
from .kb import PairSet
from .linalg import AdamState, NumericError, ShapeError, adam_step, glorot_uniform, make_rng, matmul


@dataclass
class MarginLossConfig:
    gamma: float = 5.0
    moment: int = 1
    k_neg: int = 5

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.moment not in (1, 2):
            raise ValueError("moment must be 1 or 2")


@dataclass
class GcnModel:
    dims: list[int]  # d^(0) .. d^(L)
    seed: int = 0
    weights: list[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.dims) < 2:
            raise ValueError("need at least one layer")
        if self.weights is None:
            rng = make_rng(self.seed)
            self.weights = [
                glorot_uniform(rng, self.dims[l], self.dims[l + 1])
                for l in range(len(self.dims) - 1)
            ]

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1


def gcn_forward(model: GcnModel, prop: PropagationMatrix, h0: np.ndarray) -> np.ndarray:
    return _forward_cached(model, prop, h0)[-1][1]


def _forward_cached(model: GcnModel, prop: PropagationMatrix, h0: np.ndarray):
    """Forward pass keeping (mixed_input, output) per layer for backprop."""
    if h0.shape[0] != prop.n:
        raise ShapeError(f"H0 rows {h0.shape[0]} != graph size {prop.n}")
    if h0.shape[1] != model.dims[0]:
        raise ShapeError(f"H0 dim {h0.shape[1]} != model input dim {model.dims[0]}")
    layers = []
    h = h0
    last = model.n_layers - 1
    for l, w in enumerate(model.weights):
        mixed = matmul(prop.l_hat, h)
        pre = matmul(mixed, w)
        h = pre if l == last else np.maximum(pre, 0.0)
        layers.append((mixed, h))
    return layers


def _backward(model: GcnModel, prop: PropagationMatrix, h0: np.ndarray,
              layers, d_out: np.ndarray, grads: list[np.ndarray]) -> None:
    """Accumulate dL/dW^(l) given dL/d(output rows)."""
    last = model.n_layers - 1
    delta = d_out
    for l in range(last, -1, -1):
        mixed, out = layers[l]
        if l != last:
            delta = delta * (out > 0)
        grads[l] += matmul(mixed.T, delta)
        if l > 0:
            delta = matmul(prop.l_hat.T, matmul(delta, model.weights[l].T))


def distance(u: np.ndarray, v: np.ndarray, moment: int) -> float:
    if u.shape != v.shape:
        raise ShapeError(f"distance dims differ: {u.shape} vs {v.shape}")
    diff = u - v
    if moment == 1:
        return float(np.sum(np.abs(diff)))
    if moment == 2:
        return float(np.sqrt(np.sum(diff * diff)))
    raise ValueError("moment must be 1 or 2")


def _distance_grad(u: np.ndarray, v: np.ndarray, moment: int) -> np.ndarray:
    """dD/du; dD/dv is its negation. Subgradient 0 at kinks and at D=0."""
    diff = u - v
    if moment == 1:
        return np.sign(diff)
    d = np.sqrt(np.sum(diff * diff))
    if d == 0.0:
        return np.zeros_like(diff)
    return diff / d


def margin_loss(pos: list[tuple[np.ndarray, np.ndarray]],
                neg: list[tuple[np.ndarray, np.ndarray]],
                cfg: MarginLossConfig) -> float:
    """Sum of hinges [D(pos_i) + gamma - D(neg_ij)]_+.

    `neg` holds len(pos) groups of k_neg pairs, flattened in order:
    positive i is compared against neg[i*k_neg : (i+1)*k_neg].
    """
    if not pos:
        raise ValueError("positive pair list is empty")
    if len(neg) != len(pos) * cfg.k_neg:
        raise ShapeError(f"expected {len(pos) * cfg.k_neg} negatives, got {len(neg)}")
    total = 0.0
    for i, (e, s) in enumerate(pos):
        d_pos = distance(e, s, cfg.moment)
        for e2, s2 in neg[i * cfg.k_neg : (i + 1) * cfg.k_neg]:
            total += max(0.0, d_pos + cfg.gamma - distance(e2, s2, cfg.moment))
    return total


def structure_embedding(entity_out: np.ndarray, cand_out: np.ndarray,
                        e: int, s: int) -> np.ndarray:
    """Element-wise product of the two GCN output rows."""
    if not 0 <= e < entity_out.shape[0]:
        raise IndexError(f"entity id {e} out of range")
    if not 0 <= s < cand_out.shape[0]:
        raise IndexError(f"candidate id {s} out of range")
    return entity_out[e] * cand_out[s]


def sample_negatives(positives: list[tuple[int, int]], standard_ids: list[int],
                     k_neg: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Corrupt the entity side of each positive with a non-matching standard."""
    neg = []
    pool = np.asarray(standard_ids)
    for e, s in positives:
        for _ in range(k_neg):
            e2 = e
            while e2 == e:
                e2 = int(pool[rng.integers(len(pool))])
            neg.append((e2, s))
    return neg


def margin_loss_and_grads(model: GcnModel,
                          ent_prop: PropagationMatrix, ent_h0: np.ndarray,
                          cand_prop: PropagationMatrix, cand_h0: np.ndarray,
                          positives: list[tuple[int, int]],
                          negatives: list[tuple[int, int]],
                          cfg: MarginLossConfig):
    """Full-batch margin loss and dL/dW^(l) (shared across both graphs)."""
    ent_layers = _forward_cached(model, ent_prop, ent_h0)
    cand_layers = _forward_cached(model, cand_prop, cand_h0)
    he = ent_layers[-1][1]
    hs = cand_layers[-1][1]
    d_he = np.zeros_like(he)
    d_hs = np.zeros_like(hs)
    total = 0.0
    for i, (e, s) in enumerate(positives):
        d_pos = distance(he[e], hs[s], cfg.moment)
        g_pos = _distance_grad(he[e], hs[s], cfg.moment)
        for e2, s2 in negatives[i * cfg.k_neg : (i + 1) * cfg.k_neg]:
            d_neg = distance(he[e2], hs[s2], cfg.moment)
            term = d_pos + cfg.gamma - d_neg
            if term > 0.0:
                total += term
                d_he[e] += g_pos
                d_hs[s] -= g_pos
                g_neg = _distance_grad(he[e2], hs[s2], cfg.moment)
                d_he[e2] -= g_neg
                d_hs[s2] += g_neg
    grads = [np.zeros_like(w) for w in model.weights]
    _backward(model, ent_prop, ent_h0, ent_layers, d_he, grads)
    _backward(model, cand_prop, cand_h0, cand_layers, d_hs, grads)
    return total, grads


def train_gcn(model: GcnModel,
              ent_prop: PropagationMatrix, ent_h0: np.ndarray,
              cand_prop: PropagationMatrix, cand_h0: np.ndarray,
              positives: PairSet, standard_ids: list[int],
              cfg: MarginLossConfig, adam: AdamState, epochs: int,
              rng: np.random.Generator):
    """Full-batch Adam on W^(l) only; negatives resampled every epoch."""
    history = []
    pos = positives.positives
    for _ in range(epochs):
        neg = sample_negatives(pos, standard_ids, cfg.k_neg, rng)
        loss, grads = margin_loss_and_grads(
            model, ent_prop, ent_h0, cand_prop, cand_h0, pos, neg, cfg)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite margin loss {loss}")
        params = {f"W{l}": w for l, w in enumerate(model.weights)}
        gdict = {f"W{l}": g for l, g in enumerate(grads)}
        adam_step(params, gdict, adam)
        history.append(loss)
    return model, history
