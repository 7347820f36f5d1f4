"""MLP fusing the semantic and structure relevancy embeddings.

Input is the concatenation [x_se; x_st]. Each hidden level applies two
affine+ReLU sub-layers in a row; the final affine layer feeds a sigmoid
that yields the fused relevancy probability. Trained with binary
cross-entropy on cached, frozen upstream embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import AdamState, NumericError, ShapeError, adam_step, glorot_uniform, make_rng, matmul
from .semantic import P_CLAMP, sigmoid


@dataclass
class FusionMlp:
    d_in: int
    hidden: int = 128
    n_hidden: int = 1  # hidden levels; each level holds two affine+ReLU maps
    seed: int = 0
    params: dict = field(default=None, repr=False)

    def __post_init__(self):
        if self.params is None:
            rng = make_rng(self.seed)
            self.params = {}
            d = self.d_in
            for l in range(self.n_hidden):
                self.params[f"W{l}"] = glorot_uniform(rng, d, self.hidden)
                self.params[f"b{l}"] = np.zeros((1, self.hidden))
                self.params[f"Wh{l}"] = glorot_uniform(rng, self.hidden, self.hidden)
                self.params[f"bh{l}"] = np.zeros((1, self.hidden))
                d = self.hidden
            self.params["Wf"] = glorot_uniform(rng, d, 1)
            self.params["bf"] = np.zeros((1, 1))

    def forward_batch(self, x: np.ndarray):
        """Probabilities for a batch of concatenated inputs, with caches."""
        if x.shape[1] != self.d_in:
            raise ShapeError(f"input dim {x.shape[1]} != model dim {self.d_in}")
        caches = []
        h = x
        for l in range(self.n_hidden):
            a = matmul(h, self.params[f"W{l}"]) + self.params[f"b{l}"]
            ha = np.maximum(a, 0.0)
            b = matmul(ha, self.params[f"Wh{l}"]) + self.params[f"bh{l}"]
            hb = np.maximum(b, 0.0)
            caches.append((h, ha, hb))
            h = hb
        logits = matmul(h, self.params["Wf"]) + self.params["bf"]
        p = sigmoid(logits[:, 0])
        return p, (caches, h, logits)

    def backward_batch(self, cache, dlogits: np.ndarray) -> dict:
        caches, h_last, _ = cache
        grads = {name: np.zeros_like(p) for name, p in self.params.items()}
        dl = dlogits[:, None]
        grads["Wf"] += matmul(h_last.T, dl)
        grads["bf"][0, 0] += dl.sum()
        dh = matmul(dl, self.params["Wf"].T)
        for l in range(self.n_hidden - 1, -1, -1):
            h_in, ha, hb = caches[l]
            db = dh * (hb > 0)
            grads[f"Wh{l}"] += matmul(ha.T, db)
            grads[f"bh{l}"][0] += db.sum(axis=0)
            da = matmul(db, self.params[f"Wh{l}"].T) * (ha > 0)
            grads[f"W{l}"] += matmul(h_in.T, da)
            grads[f"b{l}"][0] += da.sum(axis=0)
            dh = matmul(da, self.params[f"W{l}"].T)
        return grads


def fuse(model: FusionMlp, x_se: np.ndarray, x_st: np.ndarray) -> float:
    """Fused relevancy probability for one (x_se, x_st) pair."""
    x = np.concatenate([x_se, x_st])[None, :]
    p, _ = model.forward_batch(x)
    return float(p[0])


def fusion_loss_and_grads(model: FusionMlp, x: np.ndarray, y: np.ndarray):
    """Mean BCE over a cached-feature batch, plus parameter gradients."""
    p, cache = model.forward_batch(x)
    pc = np.clip(p, P_CLAMP, 1.0 - P_CLAMP)
    loss = float(np.mean(-y * np.log(pc) - (1.0 - y) * np.log(1.0 - pc)))
    dlogits = (p - y) / len(y)
    return loss, model.backward_batch(cache, dlogits)


def train_fusion(model: FusionMlp, examples: list[tuple[np.ndarray, np.ndarray, float]],
                 adam: AdamState, epochs: int,
                 rng: np.random.Generator | None = None):
    """Full-batch Adam on the fusion parameters only; upstream stays frozen."""
    if epochs == 0:
        return model, []
    x = np.stack([np.concatenate([se, st]) for se, st, _ in examples])
    y = np.array([lab for _, _, lab in examples], dtype=np.float64)
    history = []
    for _ in range(epochs):
        loss, grads = fusion_loss_and_grads(model, x, y)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite fusion loss {loss}")
        adam_step(model.params, grads, adam)
        history.append(loss)
    return model, history
