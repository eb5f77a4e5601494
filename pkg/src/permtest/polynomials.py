"""Symmetric-polynomial kernel.

Power sums, elementary symmetric polynomials (Newton's identities), the
inverse-Vandermonde matrix ``E`` and the integrated Lagrange basis
``f_l(t) = sum_j c_{jl} t**j`` on a set of reference nodes.

Node indices are 0-based throughout: ``f_coefficients(nodes, 0)`` is the
integrated Lagrange polynomial whose derivative is 1 at ``nodes[0]``.
"""

from __future__ import annotations

import math

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNodes

DISTINCT_RTOL = 1e-9


def power_sums(x, max_order: int) -> np.ndarray:
    """Return ``p_1, ..., p_max_order`` of ``x``.

    Sums run over the last axis, so a ``(reps, k)`` batch gives a
    ``(reps, max_order)`` result.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    x = np.asarray(x, dtype=float)
    powers = np.cumprod(np.repeat(x[..., None], max_order, axis=-1), axis=-1)
    return powers.sum(axis=-2)


@dataclass(frozen=True)
class SymmetricCoefficients:
    """``e_0..e_k`` and power sums ``p_1..p_k`` of a vector of length k."""

    e: np.ndarray
    p: np.ndarray

    @property
    def k(self) -> int:
        return len(self.e) - 1

    def characteristic(self) -> np.ndarray:
        """Coefficients of ``prod_j (t - x_j)`` in increasing powers of t."""
        k = self.k
        signs = (-1.0) ** (k - np.arange(k + 1))
        return signs * self.e[::-1]


def _common_integers(x: np.ndarray) -> tuple[list[int], int]:
    """Integers ``m_j`` and exponent ``s`` with ``x_j == m_j * 2**s`` exactly."""
    parts = []
    for v in x:
        mant, exp = math.frexp(float(v))
        parts.append((int(mant * (1 << 53)), exp - 53))
    nonzero = [exp for mant, exp in parts if mant != 0]
    if not nonzero:
        return [0] * len(parts), 0
    base = min(nonzero)
    return [mant << (exp - base) if mant else 0 for mant, exp in parts], base


def _scaled_float(n: int, exp: int) -> float:
    """``n * 2**exp`` as a float, rounded from the exact integer."""
    drop = max(n.bit_length() - 1000, 0)
    if drop:
        n >>= drop
    try:
        return math.ldexp(float(n), exp + drop)
    except OverflowError:
        return math.copysign(math.inf, n)


def _ratio(num: int, den: int) -> float:
    """Correctly rounded ``num / den``, saturating to +-inf on overflow."""
    try:
        return num / den
    except OverflowError:
        return math.copysign(math.inf, num) * math.copysign(1, den)


def elementary_symmetric(x) -> SymmetricCoefficients:
    """Elementary symmetric polynomials of ``x`` via Newton's identities."""
    x = np.asarray(x, dtype=float).ravel()
    k = x.size
    e = np.zeros(k + 1)
    e[0] = 1.0
    if k == 0:
        return SymmetricCoefficients(e=e, p=np.zeros(0))
    # The recurrence alternates in sign and cancels badly in floating point
    # (same-sign inputs lose up to half the digits at k = 10).  Every float
    # is an integer times a power of two, so after scaling to a common
    # exponent the power sums and e_l are exact integers and the division by
    # l in the recurrence is exact; rounding happens once, at the end.
    ints, shift = _common_integers(x)
    powers = list(ints)
    p_int = []
    for _ in range(k):
        p_int.append(sum(powers))
        powers = [a * b for a, b in zip(powers, ints)]
    e_int = [1]
    for l in range(1, k + 1):
        acc = 0
        for j in range(1, l + 1):
            term = e_int[l - j] * p_int[j - 1]
            acc += term if j % 2 else -term
        e_int.append(acc // l)
    e[:] = [_scaled_float(v, shift * l) for l, v in enumerate(e_int)]
    p = np.array([_scaled_float(v, shift * (l + 1)) for l, v in enumerate(p_int)])
    return SymmetricCoefficients(e=e, p=p)


def min_gap(values) -> float:
    values = np.sort(np.asarray(values, dtype=float).ravel())
    if values.size < 2:
        return np.inf
    return float(np.min(np.diff(values)))


def check_distinct(values, rtol: float = DISTINCT_RTOL) -> np.ndarray:
    """Return ``values`` as an array, raising DegenerateNodes on near ties."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size >= 2:
        scale = 1.0 + float(np.max(np.abs(values)))
        gap = min_gap(values)
        if gap < rtol * scale:
            raise DegenerateNodes(
                f"nodes are not distinct (min gap {gap:.3g}); "
                "use the degenerate test path"
            )
    return values


def vandermonde(nodes) -> np.ndarray:
    """``V[j, l] = nodes[j] ** l``."""
    nodes = np.asarray(nodes, dtype=float).ravel()
    return np.vander(nodes, N=nodes.size, increasing=True)


def _integer_characteristic(ints: list[int]) -> list[int]:
    """Coefficients, low order first, of ``prod_j (s - ints[j])``."""
    char = [1]
    for a in ints:
        nxt = [0] * (len(char) + 1)
        for i, c in enumerate(char):
            nxt[i + 1] += c
            nxt[i] -= a * c
        char = nxt
    return char


def _leave_one_out(char: list[int], root: int) -> list[int]:
    # Synthetic division of the monic characteristic polynomial by (s - root);
    # exact because root is one of its roots.
    k = len(char) - 1
    quotient = [0] * k
    quotient[k - 1] = char[k]
    for i in range(k - 1, 0, -1):
        quotient[i - 1] = char[i] + root * quotient[i]
    return quotient


@dataclass(frozen=True)
class EMatrix:
    """Inverse of the Vandermonde matrix, built from symmetric polynomials.

    Row ``j`` holds the coefficients of ``t**j`` of the Lagrange basis
    polynomials; column ``l`` belongs to ``nodes[l]``.
    """

    entries: np.ndarray
    nodes: np.ndarray

    def determinant(self) -> float:
        return float(np.linalg.det(self.entries))


def e_matrix(nodes) -> EMatrix:
    """Build ``E(nodes)`` with ``E @ V == V @ E == I``.

    Raises
    ------
    DegenerateNodes
        If two nodes coincide within the distinctness tolerance.
    """
    nodes = check_distinct(nodes)
    k = nodes.size
    # Deflating a rounded characteristic polynomial in floating point loses
    # several digits for clustered nodes.  With the nodes written as
    # ints * 2**shift the polynomial, its deflations and the denominators
    # prod_{j != l} (x_l - x_j) are exact integers, so each entry is a single
    # correctly rounded quotient.
    ints, shift = _common_integers(nodes)
    char = _integer_characteristic(ints)
    entries = np.empty((k, k))
    for l, root in enumerate(ints):
        quotient = _leave_one_out(char, root)
        denom = 0
        for c in reversed(quotient):
            denom = denom * root + c
        for i, num in enumerate(quotient):
            # entry = num * 2**(shift * (k-1-i)) / (denom * 2**(shift * (k-1)))
            scale = -shift * i
            if scale >= 0:
                entries[i, l] = _ratio(num << scale, denom)
            else:
                entries[i, l] = _ratio(num, denom << -scale)
    return EMatrix(entries=entries, nodes=nodes)


def f_coefficient_matrix(nodes) -> np.ndarray:
    """All integrated Lagrange coefficients at once.

    Column ``l`` holds ``c_1..c_k`` with ``f_l(t) = sum_j c_j t**j``, so that
    ``power_sums(x, k) @ C`` gives ``sum_j f_l(x_j)`` for every l.
    A single node gives ``f(t) = t``.
    """
    nodes = np.asarray(nodes, dtype=float).ravel()
    if nodes.size == 1:
        return np.ones((1, 1))
    E = e_matrix(nodes).entries
    return E / np.arange(1, nodes.size + 1)[:, None]


def f_coefficients(nodes, l: int) -> np.ndarray:
    """Coefficients ``c_1..c_k`` of the l-th integrated Lagrange polynomial."""
    C = f_coefficient_matrix(nodes)
    if not 0 <= l < C.shape[1]:
        raise IndexError(f"l={l} out of range for {C.shape[1]} nodes")
    return C[:, l].copy()


def eval_f(coeffs, t) -> np.ndarray:
    """Evaluate ``sum_j c_j t**j`` (no constant term)."""
    coeffs = np.asarray(coeffs, dtype=float)
    t = np.asarray(t, dtype=float)
    acc = np.zeros_like(t)
    for c in coeffs[::-1]:
        acc = (acc + c) * t
    return acc


def eval_f_derivative(coeffs, t) -> np.ndarray:
    """Term-wise derivative ``sum_j j c_j t**(j-1)``."""
    coeffs = np.asarray(coeffs, dtype=float)
    deriv = coeffs * np.arange(1, coeffs.size + 1)
    return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), deriv)


def sum_f(x, coeffs) -> np.ndarray:
    """``sum_j f(x_j)`` from power sums; ``coeffs`` may be a vector or a matrix."""
    coeffs = np.asarray(coeffs, dtype=float)
    return power_sums(x, coeffs.shape[0]) @ coeffs


def envelope_g(t, centers) -> np.ndarray:
    """Identifiability envelope ``g`` with ``1/g(t) = sum_h (t - centers_h)**-2``.

    Exactly 0 at any center; for one center this is ``(t - c)**2``.
    """
    t = np.asarray(t, dtype=float)
    centers = np.asarray(centers, dtype=float).ravel()
    diff = t[..., None] - centers
    hit = np.any(diff == 0.0, axis=-1)
    with np.errstate(divide="ignore", over="ignore"):
        inv = np.sum(1.0 / diff**2, axis=-1)
        out = 1.0 / inv
    return np.where(hit, 0.0, out)
