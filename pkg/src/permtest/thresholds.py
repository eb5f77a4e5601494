"""Error-minimizing thresholds against a local alternative.

Gaussian: minimize ``P(chi2_k > t) + P(chi2_{k, delta^2} <= t)``.
Categorical: minimize ``P(chi2_{k-1} > t) + sup P(chi2_{k-1, a} + (delta^2 - a) <= t)``
with the sup over ``a`` in ``[0, delta^2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .distributions import ChiSquared, chi2_quantile, chi2_sf

COARSE_POINTS = 512
SPLIT_POINTS = 201
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ThresholdSpec:
    k: int
    delta: float
    kind: str
    t_star: float
    total_error: float


def noncentral_cdf(df: float, noncentrality, x) -> np.ndarray:
    """Elementwise ``P(chi2_{df, noncentrality} <= x)`` over broadcast arrays."""
    nc, x = np.broadcast_arrays(np.asarray(noncentrality, dtype=float), np.asarray(x, dtype=float))
    lam = nc / 2.0
    lam_max = float(lam.max()) if lam.size else 0.0
    hi = int(math.ceil(lam_max + 12.0 * math.sqrt(lam_max + 1.0) + 30.0))
    j = np.arange(hi + 1)
    logw = special.xlogy(j, lam[..., None]) - lam[..., None] - special.gammaln(j + 1.0)
    half = np.maximum(x, 0.0)[..., None] / 2.0
    out = np.sum(np.exp(logw) * special.gammainc(df / 2.0 + j, half), axis=-1)
    return np.where(x <= 0, 0.0, np.clip(out, 0.0, 1.0))


def gauss_total_error(k: int, delta: float, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return chi2_sf(ChiSquared(k), t) + noncentral_cdf(k, delta**2, t)


def _split_values(k: int, delta: float, t: float, splits: np.ndarray) -> np.ndarray:
    d2 = delta**2
    return noncentral_cdf(k - 1, splits, t - (d2 - splits))


def worst_split(k: int, delta: float, t: float, points: int = SPLIT_POINTS) -> tuple[float, float]:
    """``(a*, value)`` maximizing ``P(chi2_{k-1, a} + delta^2 - a <= t)`` over ``a``."""
    d2 = delta**2
    grid = np.linspace(0.0, d2, points)
    vals = _split_values(k, delta, t, grid)
    i = int(np.argmax(vals))
    best_a, best_v = float(grid[i]), float(vals[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]
    f = lambda a: -float(_split_values(k, delta, t, np.array([a]))[0])
    a, v = _golden_min(f, lo, hi, tol=1e-9 * max(d2, 1.0))
    if -v > best_v:
        best_a, best_v = a, -v
    return best_a, best_v


def cat_total_error(k: int, delta: float, t) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    sup = np.array([worst_split(k, delta, float(ti))[1] for ti in t])
    return chi2_sf(ChiSquared(k - 1), t) + sup


def _golden_min(f, lo: float, hi: float, tol: float = 1e-6) -> tuple[float, float]:
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def _upper_limit(k: int, delta: float) -> float:
    d2 = delta**2
    return k + d2 + 12.0 * math.sqrt(2.0 * k + 4.0 * d2)


def _minimize(objective_grid, objective, k: int, delta: float) -> tuple[float, float]:
    upper = _upper_limit(k, delta)
    grid = np.linspace(upper / COARSE_POINTS, upper, COARSE_POINTS)
    vals = objective_grid(grid)
    i = int(np.argmin(vals))
    lo = grid[i - 1] if i > 0 else 0.0
    hi = grid[min(i + 1, COARSE_POINTS - 1)]
    t, v = _golden_min(objective, lo, hi, tol=1e-6)
    at_grid = objective(float(grid[i]))
    if v > at_grid:
        t, v = float(grid[i]), at_grid
    return float(t), float(v)


def optimal_threshold_gauss(k: int, delta: float) -> ThresholdSpec:
    """Threshold minimizing Type-1 plus Type-2 error for the Gaussian tests."""
    if k < 2 or delta <= 0:
        raise ValueError("need k >= 2 and delta > 0")
    obj = lambda t: float(gauss_total_error(k, delta, t))
    t, v = _minimize(lambda g: gauss_total_error(k, delta, g), obj, k, delta)
    return ThresholdSpec(k=k, delta=delta, kind="gaussian", t_star=t, total_error=v)


def optimal_threshold_cat(k: int, delta: float) -> ThresholdSpec:
    """Threshold minimizing Type-1 plus worst-split Type-2 error for categorical tests."""
    if k < 2 or delta <= 0:
        raise ValueError("need k >= 2 and delta > 0")

    def coarse(grid):
        splits = np.linspace(0.0, delta**2, SPLIT_POINTS)
        table = noncentral_cdf(k - 1, splits[None, :], grid[:, None] - (delta**2 - splits[None, :]))
        return chi2_sf(ChiSquared(k - 1), grid) + table.max(axis=1)

    obj = lambda t: float(cat_total_error(k, delta, t)[0])
    t, v = _minimize(coarse, obj, k, delta)
    return ThresholdSpec(k=k, delta=delta, kind="categorical", t_star=t, total_error=v)


def noncentral_null_threshold(k: int, tau_sq: float, alpha: float) -> float:
    """Upper-``alpha`` point of ``chi2_{k, tau_sq}``, the null law of ``T_g`` under ambiguous clustering."""
    if tau_sq < 0:
        raise ValueError("tau_sq must be nonnegative")
    return chi2_quantile(ChiSquared(k, tau_sq), alpha)
