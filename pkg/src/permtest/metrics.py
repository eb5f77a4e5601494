"""Permutation-minimized distances between vectors.

For scalar entries and squared-difference cost the optimal matching pairs
the sorted entries in order, so no assignment solver is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, NotAProbabilityVector

PROB_ATOL = 1e-8


@dataclass(frozen=True)
class Matching:
    """Optimal pairing ``a[j] <-> b[permutation[j]]`` and its distance."""

    permutation: np.ndarray
    distance: float


def _sorted_matching(a: np.ndarray, b: np.ndarray) -> Matching:
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    order_a = np.argsort(a, kind="stable")
    order_b = np.argsort(b, kind="stable")
    perm = np.empty(a.size, dtype=int)
    perm[order_a] = order_b
    dist = float(np.sqrt(np.sum((a - b[perm]) ** 2)))
    return Matching(permutation=perm, distance=dist)


def sorted_distance(a, b) -> np.ndarray:
    """``min_pi ||a - b_pi||`` over the last axis; broadcasts over batches."""
    a = np.sort(np.asarray(a, dtype=float), axis=-1)
    b = np.sort(np.asarray(b, dtype=float), axis=-1)
    if a.shape[-1] != b.shape[-1]:
        raise LengthMismatch(f"lengths differ: {a.shape[-1]} vs {b.shape[-1]}")
    return np.sqrt(np.sum((a - b) ** 2, axis=-1))


def gauss_distance(theta, mu) -> Matching:
    """``l(theta, mu) = min_pi sqrt(sum_j (theta_j - mu_pi(j))**2)``."""
    theta = np.asarray(theta, dtype=float).ravel()
    mu = np.asarray(mu, dtype=float).ravel()
    return _sorted_matching(theta, mu)


def check_probability(p, name: str = "p") -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        raise NotAProbabilityVector(f"{name} has entries outside [0, 1]")
    if abs(p.sum() - 1.0) > PROB_ATOL:
        raise NotAProbabilityVector(f"{name} sums to {p.sum():.10g}, not 1")
    return p


def cat_distance(p, q) -> Matching:
    """``l(p, q) = 2 min_pi ||sqrt(p) - sqrt(q_pi)||``."""
    p = check_probability(p, "p")
    q = check_probability(q, "q")
    m = _sorted_matching(np.sqrt(p), np.sqrt(q))
    return Matching(permutation=m.permutation, distance=2.0 * m.distance)
