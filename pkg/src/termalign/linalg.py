"""Dense float64 matrix kernel, Adam optimizer, and seeded RNG.

All trainable modules run on top of this file. Matrices are plain 2-D
numpy float64 arrays. `matmul` fixes the summation order (sequential over
the inner index k, accumulating from 0.0), so its result is bit-identical
to a naive triple loop with k innermost on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class NumericError(ArithmeticError):
    """A non-finite value appeared where finite values are required."""


def as_matrix(data, rows=None, cols=None) -> np.ndarray:
    """Validate and return a 2-D float64 matrix with finite entries."""
    m = np.asarray(data, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected 2-D matrix, got ndim={m.ndim}")
    if rows is not None and m.shape[0] != rows:
        raise ShapeError(f"expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ShapeError(f"expected {cols} cols, got {m.shape[1]}")
    check_finite(m)
    return m


def check_finite(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NumericError(f"non-finite value in {what}")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with a fixed summation order.

    out[i, j] = ((0.0 + a[i,0]*b[0,j]) + a[i,1]*b[1,j]) + ... in IEEE-754
    float64, i.e. the accumulation runs sequentially over k. Bit-exact
    against a naive triple loop with k as the innermost index.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError("matmul expects 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dims differ: {a.shape} x {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float64)
    for k in range(a.shape[1]):
        out += a[:, k : k + 1] * b[k : k + 1, :]
    return out


@dataclass
class AdamState:
    """Per-parameter Adam accumulators plus shared hyperparameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def ensure(self, name: str, shape) -> None:
        if name not in self.m:
            self.m[name] = np.zeros(shape, dtype=np.float64)
            self.v[name] = np.zeros(shape, dtype=np.float64)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """One Adam update, in place, over a dict of named parameter arrays.

    Standard bias-corrected Adam. The step counter is shared across all
    parameters of the dict, matching one optimizer step per call.
    """
    state.t += 1
    t = state.t
    for name in sorted(params):
        g = grads[name]
        p = params[name]
        if g.shape != p.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.shape} for {name}")
        check_finite(g, f"gradient of {name}")
        state.ensure(name, p.shape)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def finite_diff_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Entrywise central-difference gradient of a scalar function of x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + h
        fp = f(x)
        x[idx] = orig - h
        fm = f(x)
        x[idx] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError("non-finite loss in finite difference probe")
        g[idx] = (fp - fm) / (2.0 * h)
    return g


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; same seed gives the same stream everywhere."""
    return np.random.Generator(np.random.PCG64(seed))


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Fan-based uniform init in [-sqrt(6/(fan_in+fan_out)), +...]."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def format_float(x: float) -> str:
    """17-significant-digit decimal, enough to round-trip any float64."""
    return f"{x:.17g}"


def save_matrix(m: np.ndarray, path) -> None:
    """Write the text fixture format: `rows cols`, then one line per row."""
    m = as_matrix(m)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{m.shape[0]} {m.shape[1]}\n")
        for row in m:
            fh.write(" ".join(format_float(x) for x in row) + "\n")


def load_matrix(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: bad matrix header")
        rows, cols = int(header[0]), int(header[1])
        out = np.empty((rows, cols), dtype=np.float64)
        for i in range(rows):
            vals = fh.readline().split()
            if len(vals) != cols:
                raise ValueError(f"{path}: row {i} has {len(vals)} values, expected {cols}")
            out[i] = [float(v) for v in vals]
    return as_matrix(out)
