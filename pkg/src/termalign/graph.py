"""Adjacency construction and symmetric Laplacian normalization.

Entities get a 0/1 adjacency built from the triples (both relation types
count equally, edges symmetrized, duplicates clamp to 1). Candidates get
an all-zero adjacency, so after adding self-loops their propagation
matrix is the identity and each candidate only sees itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kb import KnowledgeBase
from .linalg import ShapeError, as_matrix


@dataclass
class PropagationMatrix:
    """n x n operator D^(-1/2) (A + I) D^(-1/2)."""

    n: int
    l_hat: np.ndarray


def build_entity_adjacency(kb: KnowledgeBase) -> np.ndarray:
    n = kb.n_entities
    a = np.zeros((n, n), dtype=np.float64)
    for t in kb.triples:
        # edge delivers information from head to tail and back (symmetrized)
        a[t.tail, t.head] = 1.0
        a[t.head, t.tail] = 1.0
    return a


def build_candidate_adjacency(m: int) -> np.ndarray:
    if m < 1:
        raise ShapeError("candidate count must be >= 1")
    return np.zeros((m, m), dtype=np.float64)


def normalize(a: np.ndarray) -> PropagationMatrix:
    """Self-loop, degree-normalize: D^(-1/2) (a + I) D^(-1/2)."""
    a = as_matrix(a)
    n, m = a.shape
    if n != m:
        raise ShapeError(f"adjacency must be square, got {a.shape}")
    if np.any(a < 0):
        raise ValueError("adjacency entries must be >= 0")
    a_hat = a + np.eye(n)
    deg = a_hat.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    l_hat = a_hat * inv_sqrt[:, None] * inv_sqrt[None, :]
    return PropagationMatrix(n=n, l_hat=l_hat)
