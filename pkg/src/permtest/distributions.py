"""Null-distribution calculus.

Central and noncentral chi-squared laws, and the two-sample mixture
``beta/2 * X1 + (1 - beta)/2 * X2 + X3`` with ``X1, X2 ~ chi2_{k-d}`` and
``X3 ~ chi2_{d-1}`` independent.

Quantiles use the upper-tail convention: ``quantile(alpha)`` is the value
exceeded with probability ``alpha``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

from .errors import InvalidShape

POISSON_TAIL = 1e-12
MC_FALLBACK_DRAWS = 10_000_000
MC_FALLBACK_SEED = 20_181_029


def make_rng(seed: int | np.random.SeedSequence | None = None, *key: int) -> np.random.Generator:
    """Generator for ``(seed, *key)``; distinct keys give independent streams."""
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(entropy=seed)
    if key:
        ss = np.random.SeedSequence(entropy=ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ChiSquared:
    df: int
    noncentrality: float = 0.0

    def __post_init__(self):
        if self.df < 0:
            raise ValueError("df must be nonnegative")
        if self.noncentrality < 0:
            raise ValueError("noncentrality must be nonnegative")

    @property
    def mean(self) -> float:
        return self.df + self.noncentrality

    @property
    def variance(self) -> float:
        return 2.0 * (self.df + 2.0 * self.noncentrality)

    def cdf(self, x, tail: float = POISSON_TAIL):
        return chi2_cdf(self, x, tail=tail)

    def sf(self, x, tail: float = POISSON_TAIL):
        return chi2_sf(self, x, tail=tail)

    def quantile(self, alpha: float) -> float:
        return chi2_quantile(self, alpha)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return sample(self, rng, count)


def _central_cdf(df: float, x: np.ndarray) -> np.ndarray:
    if df == 0:
        return (x >= 0).astype(float)
    return special.gammainc(df / 2.0, np.maximum(x, 0.0) / 2.0)


def _central_sf(df: float, x: np.ndarray) -> np.ndarray:
    if df == 0:
        return (x < 0).astype(float)
    return special.gammaincc(df / 2.0, np.maximum(x, 0.0) / 2.0)


def _poisson_window(lam: float, tail: float) -> tuple[np.ndarray, np.ndarray]:
    """Indices and weights of Poisson(lam) covering all but ``tail`` mass."""
    pois = stats.poisson(lam)
    lo = int(pois.ppf(tail / 2.0)) if lam > 0 else 0
    hi = int(pois.isf(tail / 2.0)) + 1
    j = np.arange(max(lo, 0), hi + 1)
    w = np.exp(special.xlogy(j, lam) - lam - special.gammaln(j + 1.0))
    # Renormalize so the truncated mixture is still a distribution (its CDF
    # reaches exactly 1); this moves values by at most ``tail``.
    return j, w / w.sum()


def chi2_cdf(dist: ChiSquared, x, tail: float = POISSON_TAIL):
    """``P(X <= x)``.

    Central laws use the regularized lower incomplete gamma function; the
    noncentral law is a Poisson(``noncentrality / 2``) mixture of central
    laws with ``df + 2j`` degrees of freedom, truncated once the neglected
    Poisson mass falls below ``tail``.
    """
    xa = np.asarray(x, dtype=float)
    if dist.noncentrality == 0:
        out = _central_cdf(dist.df, xa)
    else:
        j, w = _poisson_window(dist.noncentrality / 2.0, tail)
        half = np.maximum(xa, 0.0)[..., None] / 2.0
        out = np.sum(w * special.gammainc(dist.df / 2.0 + j, half), axis=-1)
        out = np.where(xa <= 0, 0.0, out)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def chi2_sf(dist: ChiSquared, x, tail: float = POISSON_TAIL):
    """``P(X > x)``, computed without cancellation in the upper tail."""
    xa = np.asarray(x, dtype=float)
    if dist.noncentrality == 0:
        out = _central_sf(dist.df, xa)
    else:
        j, w = _poisson_window(dist.noncentrality / 2.0, tail)
        half = np.maximum(xa, 0.0)[..., None] / 2.0
        out = np.sum(w * special.gammaincc(dist.df / 2.0 + j, half), axis=-1)
        out = np.where(xa <= 0, 1.0, out)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def _upper_bracket(sf, alpha: float, start: float) -> float:
    hi = max(start, 1.0)
    while sf(hi) > alpha:
        hi *= 2.0
    return hi


def chi2_quantile(dist: ChiSquared, alpha: float) -> float:
    """Upper-``alpha`` critical value ``q`` with ``P(X <= q) = 1 - alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if dist.df == 0 and dist.noncentrality == 0:
        return 0.0
    if alpha <= 0.5:
        f = lambda q: chi2_sf(dist, q) - alpha
    else:
        f = lambda q: (1.0 - alpha) - chi2_cdf(dist, q)
    hi = _upper_bracket(lambda q: chi2_sf(dist, q), alpha, dist.mean + 10.0 * math.sqrt(dist.variance))
    return float(optimize.brentq(f, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500))


@dataclass(frozen=True)
class MixtureNull:
    """Limit law of the two-sample ``T_g`` statistic.

    With ``common=False`` the ``chi2_{d-1}`` term is dropped, giving the law
    of ``T_g - T_f``.  Components with zero weight (``beta`` of 0 or 1) are
    omitted.
    """

    k: int
    d: int
    beta: float
    common: bool = True

    def __post_init__(self):
        if self.d < 1 or self.d > self.k:
            raise InvalidShape(f"need 1 <= d <= k, got k={self.k}, d={self.d}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")

    @property
    def terms(self) -> list[tuple[float, int]]:
        """``(weight, df)`` pairs of the independent chi-squared components."""
        out = []
        if self.k > self.d:
            for weight in (self.beta / 2.0, (1.0 - self.beta) / 2.0):
                if weight > 0:
                    out.append((weight, self.k - self.d))
        if self.common and self.d > 1:
            out.append((1.0, self.d - 1))
        return out

    @property
    def mean(self) -> float:
        return sum(w * df for w, df in self.terms)

    def sf(self, x):
        return weighted_chi2_sf(self.terms, x)

    def cdf(self, x):
        return 1.0 - self.sf(x)

    def quantile(self, alpha: float, method: str = "quadrature") -> float:
        return mixture_quantile(self, alpha, method=method)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return sample(self, rng, count)


@functools.lru_cache(maxsize=256)
def ruben_coefficients(terms: tuple, tol: float = 1e-13, max_terms: int = 100_000) -> tuple[float, np.ndarray]:
    """Scale and mixing weights of Ruben's series for a positive chi2 combination.

    ``sum_i w_i chi2_{h_i}`` has the law of ``scale * chi2_{s + 2J}`` with
    ``J`` drawn from the returned weights (``s = sum h_i``), truncated once the
    neglected weight is below ``tol``.
    """
    lam = np.array([w for w, _ in terms], dtype=float)
    dof = np.array([h for _, h in terms], dtype=float)
    scale = float(lam.min())
    gamma = 1.0 - scale / lam
    coeffs = np.zeros(1024)
    G = np.zeros(1024)
    coeffs[0] = math.exp(float(np.sum(dof / 2.0 * np.log(scale / lam))))
    total = coeffs[0]
    gpow = np.ones_like(gamma)
    j = 0
    while 1.0 - total > tol and j + 1 < max_terms:
        j += 1
        if j >= coeffs.size:
            coeffs = np.concatenate([coeffs, np.zeros(coeffs.size)])
            G = np.concatenate([G, np.zeros(G.size)])
        gpow = gpow * gamma
        G[j] = 0.5 * float(np.sum(dof * gpow))
        # c_j = (1/j) sum_{r<j} G_{j-r} c_r
        coeffs[j] = float(np.dot(G[j:0:-1], coeffs[:j])) / j
        total += coeffs[j]
    out = coeffs[: j + 1].copy()
    out.setflags(write=False)
    return scale, out


def weighted_chi2_sf(terms, x):
    """``P(sum_i w_i chi2_{df_i} > x)`` for positive weights.

    Deterministic series (Ruben) of central chi-squared tails; the absolute
    truncation error is below 1e-13.  ``x`` may be an array.
    """
    xa = np.asarray(x, dtype=float)
    terms = [(float(w), int(h)) for w, h in terms if h > 0 and w > 0]
    if not terms:
        out = (xa < 0).astype(float)
    elif len(terms) == 1:
        w, h = terms[0]
        out = _central_sf(h, xa / w)
    else:
        scale, coeffs = ruben_coefficients(tuple(terms))
        s = sum(h for _, h in terms)
        dfs = s + 2.0 * np.arange(coeffs.size)
        half = np.maximum(xa, 0.0)[..., None] / scale / 2.0
        out = special.gammaincc(dfs / 2.0, half) @ coeffs + (1.0 - coeffs.sum())
        out = np.where(xa <= 0, 1.0, np.clip(out, 0.0, 1.0))
    return float(out) if np.ndim(out) == 0 else out


def mixture_quantile(m: MixtureNull, alpha: float, method: str = "quadrature", draws: int = MC_FALLBACK_DRAWS) -> float:
    """Critical value ``X(alpha)`` of the mixture law.

    ``method="quadrature"`` inverts the deterministic series of
    :func:`weighted_chi2_sf`;
    ``method="montecarlo"`` uses an empirical quantile of ``draws`` samples
    with a fixed seed.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    terms = m.terms
    if not terms:
        return 0.0
    if len(terms) == 1:
        w, h = terms[0]
        return w * chi2_quantile(ChiSquared(h), alpha)
    if method == "montecarlo":
        rng = make_rng(MC_FALLBACK_SEED)
        return float(np.quantile(sample(m, rng, draws), 1.0 - alpha))
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    var = sum(2.0 * w * w * h for w, h in terms)
    hi = _upper_bracket(m.sf, alpha, m.mean + 10.0 * math.sqrt(var))
    return float(optimize.brentq(lambda q: m.sf(q) - alpha, 1e-12, hi, xtol=1e-12, rtol=1e-13))


def sample(dist, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` i.i.d. draws from a ChiSquared or MixtureNull."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    if isinstance(dist, ChiSquared):
        if dist.df == 0 and dist.noncentrality == 0:
            return np.zeros(count)
        if dist.noncentrality == 0:
            return rng.chisquare(dist.df, size=count)
        return rng.noncentral_chisquare(dist.df, dist.noncentrality, size=count)
    if isinstance(dist, MixtureNull):
        out = np.zeros(count)
        for w, h in dist.terms:
            out += w * rng.chisquare(h, size=count)
        return out
    raise TypeError(f"cannot sample from {type(dist).__name__}")
