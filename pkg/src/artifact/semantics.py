"""Tag-overlap affinity, its normalised Laplacian and the retrieval penalty matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class SemanticAffinity:
    S: np.ndarray
    A: np.ndarray  # row sums of S (the diagonal of the degree matrix)
    laplacian: np.ndarray


def jaccard(a, b):
    a, b = set(a), set(b)
    if not a or not b:
        raise ValueError("jaccard needs two nonempty label sets")
    return len(a & b) / len(a | b)


def _tag_sets(database_or_sets):
    if hasattr(database_or_sets, "images"):
        return [im.tags for im in database_or_sets.images]
    return [frozenset(s) for s in database_or_sets]


def build_affinity(database):
    """Pairwise Jaccard matrix S and L = A^-1/2 (A - S) A^-1/2.

    Accepts a database or a plain sequence of tag sets.
    """
    sets = _tag_sets(database)
    n = len(sets)
    S = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            S[i, j] = S[j, i] = jaccard(sets[i], sets[j])
    A = S.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(A)
    lap = inv_sqrt[:, None] * (np.diag(A) - S) * inv_sqrt[None, :]
    lap = 0.5 * (lap + lap.T)
    return SemanticAffinity(S, A, lap)


def dissimilarity_diag(target_labels, database):
    """Diagonal entries 1 - jaccard(target_labels, L_k) for every database image."""
    if not target_labels:
        raise ValueError("target label set is empty")
    return np.array([1.0 - jaccard(target_labels, s) for s in _tag_sets(database)])


def constraint_matrix(affinity, diag, lam=1.0):
    """2 (L + lam * diag(d)); positive semidefinite for lam >= 0."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    lap = affinity.laplacian if isinstance(affinity, SemanticAffinity) else np.asarray(affinity)
    return 2.0 * (lap + lam * np.diag(np.asarray(diag, dtype=np.float64)))
