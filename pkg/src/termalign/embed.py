"""Initial node embeddings: char-n-gram encoder, file ingestion, random.

The built-in encoder hashes character 1- and 2-grams (Unicode code
points) into B buckets with salted FNV-1a 64, then applies a trainable
B x d projection and L2-normalizes the result. It stands in for an
external contextual encoder; the file loader accepts vectors produced by
any such tool in the embedding text format below.

Embedding file: line 1 `n d`, then n lines `node_id<TAB>v1 v2 ... vd`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import NumericError, check_finite, format_float, make_rng

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes, salt: int = 0) -> int:
    """Salted FNV-1a over bytes; pure-integer, identical on any platform."""
    h = (_FNV_OFFSET ^ (salt & _MASK64)) * _FNV_PRIME & _MASK64
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


@dataclass
class NodeEmbeddingMatrix:
    h: np.ndarray  # n x d
    source: str  # "file" | "char_ngram" | "random"

    @property
    def n(self) -> int:
        return self.h.shape[0]

    @property
    def d(self) -> int:
        return self.h.shape[1]


@dataclass
class CharNgramEncoder:
    """Hashed 1-/2-gram bag encoder with a trainable linear projection."""

    dim: int = 256
    buckets: int = 4096
    salt: int = 0
    seed: int = 0
    projection: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.projection is None:
            rng = make_rng(self.seed)
            # small scale keeps untrained rows well-conditioned for L2 norm
            self.projection = rng.uniform(-0.05, 0.05, size=(self.buckets, self.dim))

    def bag(self, s: str) -> dict[int, float]:
        """Bucket -> count of hashed 1- and 2-grams of code points."""
        counts: dict[int, float] = {}
        chars = list(s)
        grams = chars + ["".join(p) for p in zip(chars, chars[1:])]
        for g in grams:
            b = fnv1a64(g.encode("utf-8"), self.salt) % self.buckets
            counts[b] = counts.get(b, 0.0) + 1.0
        return counts

    def encode(self, s: str) -> np.ndarray:
        """L2-normalized projection of the n-gram bag; "" maps to zeros."""
        vec, _ = self.encode_with_cache(s)
        return vec

    def encode_with_cache(self, s: str):
        """Returns (embedding, cache) where cache carries backprop state."""
        counts = self.bag(s)
        raw = np.zeros(self.dim, dtype=np.float64)
        for b, c in counts.items():
            raw += c * self.projection[b]
        norm = float(np.sqrt(np.dot(raw, raw)))
        if norm == 0.0:
            return raw, (counts, raw, 0.0, raw)
        u = raw / norm
        return u, (counts, raw, norm, u)

    def backprop_into(self, cache, grad_u: np.ndarray, grad_proj: np.ndarray) -> None:
        """Accumulate d(loss)/d(projection) given d(loss)/d(normalized row)."""
        counts, _raw, norm, u = cache
        if norm == 0.0:
            return
        # through L2 normalization: (I - u u^T)/norm
        g_raw = (grad_u - u * np.dot(u, grad_u)) / norm
        for b, c in counts.items():
            grad_proj[b] += c * g_raw


def encode_strings(enc: CharNgramEncoder, strings: list[str]) -> NodeEmbeddingMatrix:
    h = np.zeros((len(strings), enc.dim), dtype=np.float64)
    for i, s in enumerate(strings):
        h[i] = enc.encode(s)
    return NodeEmbeddingMatrix(h=h, source="char_ngram")


def random_embeddings(rng: np.random.Generator, n: int, d: int) -> NodeEmbeddingMatrix:
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    return NodeEmbeddingMatrix(h=rng.uniform(-0.05, 0.05, size=(n, d)), source="random")


def load_embeddings(path, expected_n: int | None = None) -> NodeEmbeddingMatrix:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}:1: bad embedding header")
        n, d = int(header[0]), int(header[1])
        if expected_n is not None and n != expected_n:
            raise ValueError(f"{path}: expected {expected_n} rows, header says {n}")
        h = np.empty((n, d), dtype=np.float64)
        for i in range(n):
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: truncated at row {i}")
            lineno = i + 2
            node_id, _, rest = line.rstrip("\n").partition("\t")
            if int(node_id) != i:
                raise ValueError(f"{path}:{lineno}: node id {node_id} out of order")
            vals = rest.split()
            if len(vals) != d:
                raise ValueError(f"{path}:{lineno}: {len(vals)} values, header says d={d}")
            h[i] = [float(v) for v in vals]
    try:
        check_finite(h, "embedding file")
    except NumericError as exc:
        raise ValueError(f"{path}: {exc}") from exc
    return NodeEmbeddingMatrix(h=h, source="file")


def save_embeddings(m: NodeEmbeddingMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{m.n} {m.d}\n")
        for i in range(m.n):
            fh.write(f"{i}\t" + " ".join(format_float(x) for x in m.h[i]) + "\n")
