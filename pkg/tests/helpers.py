"""Shared samplers and brute-force oracles for the test suite."""

import itertools
import math

import numpy as np
from hypothesis import strategies as st


def jittered_chebyshev(rng: np.random.Generator, k: int) -> np.ndarray:
    """Random well-separated nodes: Chebyshev angles jittered by a quarter spacing,
    then a random affine map and shuffle."""
    angles = np.pi * (2 * np.arange(k) + 1) / (2 * k) + rng.uniform(-0.25, 0.25, k) * np.pi / k
    nodes = np.cos(angles) * rng.uniform(0.5, 2.0) + rng.uniform(-1.0, 1.0)
    return rng.permutation(nodes)


@st.composite
def node_sets(draw, min_k=2, max_k=10):
    k = draw(st.integers(min_k, max_k))
    seed = draw(st.integers(0, 2**32 - 1))
    return jittered_chebyshev(np.random.default_rng(seed), k)


def subset_elementary(x) -> list[float]:
    """``e_0..e_k`` by summing products over all subsets."""
    x = [float(v) for v in x]
    return [math.fsum(math.prod(c) for c in itertools.combinations(x, l)) for l in range(len(x) + 1)]


def lagrange_integral(nodes, l):
    """``t -> int_0^t L_l(s) ds`` built with numpy.polynomial from the product form."""
    P = np.polynomial.Polynomial
    nodes = np.asarray(nodes, dtype=float)
    basis = P([1.0])
    for j, v in enumerate(nodes):
        if j != l:
            basis = basis * P([-v, 1.0]) / (nodes[l] - v)
    return basis.integ(lbnd=0.0)


def brute_statistic(z, nodes, scale):
    """``scale * sum_l (sum_j F_l(z_j) - sum_j F_l(nodes_j))**2`` with the product-form oracle."""
    total = 0.0
    for l in range(len(nodes)):
        F = lagrange_integral(nodes, l)
        total += (np.sum(F(np.asarray(z))) - np.sum(F(np.asarray(nodes)))) ** 2
    return scale * total


def brute_distance(a, b) -> float:
    """``min_pi ||a - b_pi||`` by enumerating all permutations."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return min(float(np.sqrt(np.sum((a - b[list(p)]) ** 2))) for p in itertools.permutations(range(a.size)))
