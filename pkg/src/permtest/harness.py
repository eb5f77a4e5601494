"""Monte Carlo engine for null calibration and power curves.

Work is split into blocks keyed by ``(sample size, grid point, direction)``.
Each block draws from its own generator derived from the run seed and the
block key, so results do not depend on how many threads execute them.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .distributions import ChiSquared, MixtureNull, chi2_cdf, chi2_quantile, make_rng
from .errors import ConfigError, InfeasibleDistance
from .lambda_rule import compile_lambda
from .metrics import cat_distance, gauss_distance, sorted_distance
from .stat_tests import (
    CATEGORICAL,
    GAUSSIAN,
    NullHypothesis,
    cat_statistics,
    detect_null_partition,
    gauss_statistics,
    two_sample_test,
)

TWO_SAMPLE = "two_sample"
DISTANCE_TOL = 1e-9
DEFAULT_SIZES = (200, 500, 1000, 2000)
DEFAULT_GRID = tuple(float(x) for x in range(11))

SCENARIOS = {
    1: (GAUSSIAN, (1.0, 2.0, 3.0, 4.0, 5.0)),
    2: (GAUSSIAN, (1.0, 3.0, 3.0, 3.0, 5.0, 5.0)),
    3: (CATEGORICAL, (0.1, 0.2, 0.3, 0.4)),
    4: (CATEGORICAL, (0.1, 0.1, 0.4, 0.4)),
    5: (TWO_SAMPLE, (0.1, 0.1, 0.4, 0.4)),
}


@dataclass
class ScenarioConfig:
    """One simulation study.

    ``alternative_grid`` holds values of ``sqrt(n) * l`` (one-sample) or
    ``sqrt(2nm/(n+m)) * l`` (two-sample); ``m = round(m_ratio * n)``.
    """

    scenario_id: int | str
    kind: str
    null_reference: list[float]
    alternative_grid: list[float] = field(default_factory=lambda: list(DEFAULT_GRID))
    sample_sizes: list[int] = field(default_factory=lambda: list(DEFAULT_SIZES))
    replications: int = 10_000
    alpha: float = 0.05
    seed: int = 0
    lambda_rule: str = "log(n)"
    n_directions: int = 20
    m_ratio: float = 1.0

    def validate(self) -> None:
        if self.kind not in (GAUSSIAN, CATEGORICAL, TWO_SAMPLE):
            raise ConfigError(f"unknown kind {self.kind!r}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.n_directions < 1:
            raise ConfigError("n_directions must be >= 1")
        if not self.alternative_grid:
            raise ConfigError("alternative grid is empty")
        if any(x < 0 for x in self.alternative_grid):
            raise ConfigError("grid values must be nonnegative")
        if not self.sample_sizes or any(int(n) < 1 for n in self.sample_sizes):
            raise ConfigError("sample sizes must be positive")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if len(self.null_reference) < 2:
            raise ConfigError("null reference needs at least 2 entries")
        if self.kind != GAUSSIAN:
            q = np.asarray(self.null_reference, dtype=float)
            if np.any(q <= 0) or np.any(q >= 1) or abs(q.sum() - 1) > 1e-8:
                raise ConfigError("categorical reference must be a probability vector in (0,1)^k")
        if self.kind == TWO_SAMPLE:
            if self.m_ratio <= 0:
                raise ConfigError("m_ratio must be positive")
            compile_lambda(self.lambda_rule)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if "scenario_id" in data and data["scenario_id"] in SCENARIOS and "kind" not in data:
            base = scenario(data["scenario_id"]).to_dict()
            base.update(data)
            data = base
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    def m_for(self, n: int) -> int:
        return max(1, int(round(self.m_ratio * n)))


def scenario(scenario_id: int, **overrides) -> ScenarioConfig:
    """Built-in configuration for scenarios 1-5."""
    if scenario_id not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario_id!r}; expected 1-5")
    kind, ref = SCENARIOS[scenario_id]
    cfg = ScenarioConfig(scenario_id=scenario_id, kind=kind, null_reference=list(ref))
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown config field {key!r}")
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# alternatives


def _direction_rng(direction_seed) -> np.random.Generator:
    if isinstance(direction_seed, np.random.Generator):
        return direction_seed
    return make_rng(direction_seed)


def _solve_scale(dist_at, target: float, s_max: float | None = None) -> float:
    from scipy.optimize import brentq

    if abs(dist_at(target) - target) <= 1e-12 * max(1.0, target):
        return target
    hi = target
    while dist_at(hi) < target:
        hi *= 2.0
        if s_max is not None and hi > s_max:
            raise InfeasibleDistance("cannot reach target distance")
    return brentq(lambda s: dist_at(s) - target, 0.0, hi, xtol=1e-15, rtol=1e-15, maxiter=500)


def alternative_at_distance(reference, target_distance: float, direction_seed=0, kind: str = GAUSSIAN, max_tries: int = 20) -> np.ndarray:
    """Seeded random alternative at exactly ``target_distance`` from ``reference``.

    Gaussian: ``mu + s u`` for a random unit ``u``, with ``s`` solved so that
    ``l(theta, mu)`` hits the target.  Categorical: ``p = w**2`` where ``w``
    moves from ``sqrt(q)`` along a great circle of the unit sphere in a random
    tangent direction; ``p`` stays on the simplex by construction and the
    angle is solved for the target.  The result is checked against the
    metrics module before it is returned.
    """
    if target_distance < 0:
        raise ValueError("target_distance must be nonnegative")
    ref = np.asarray(reference, dtype=float).ravel()
    if target_distance == 0:
        return ref.copy()
    rng = _direction_rng(direction_seed)
    if kind == GAUSSIAN:
        u = rng.standard_normal(ref.size)
        u /= np.linalg.norm(u)
        s = _solve_scale(lambda s: float(sorted_distance(ref + s * u, ref)), target_distance)
        theta = ref + s * u
        got = gauss_distance(theta, ref).distance
        if abs(got - target_distance) > DISTANCE_TOL:
            raise RuntimeError(f"alternative misses target distance: {got} vs {target_distance}")
        return theta
    if kind not in (CATEGORICAL, TWO_SAMPLE):
        raise ValueError(f"unknown kind {kind!r}")
    from scipy.optimize import brentq

    root = np.sqrt(ref)
    angles = np.linspace(0.0, math.pi, 721)
    # Seeded random tangent directions first; if none reaches the target,
    # aim the great circle at each vertex of the simplex, where the distance
    # from sqrt(q) is largest.
    candidates = [rng.standard_normal(ref.size) for _ in range(max_tries)]
    candidates += list(np.eye(ref.size)[np.argsort(ref, kind="stable")])
    for v in candidates:
        v = v - root * (root @ v)
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            continue
        v /= norm
        curve = lambda phi: 2.0 * float(sorted_distance(np.abs(math.cos(phi) * root + math.sin(phi) * v), root))
        vals = np.array([curve(a) for a in angles])
        hit = np.flatnonzero(vals >= target_distance)
        if hit.size == 0:
            continue
        i = int(hit[0])
        phi = brentq(lambda a: curve(a) - target_distance, angles[i - 1], angles[i], xtol=1e-15, rtol=1e-15, maxiter=500)
        w = math.cos(phi) * root + math.sin(phi) * v
        p = w**2
        p /= p.sum()
        got = cat_distance(p, ref).distance
        if abs(got - target_distance) > DISTANCE_TOL:
            raise RuntimeError(f"alternative misses target distance: {got} vs {target_distance}")
        return p
    raise InfeasibleDistance(f"no probability vector at distance {target_distance} found")


# ---------------------------------------------------------------------------
# simulation blocks


@dataclass
class PowerPoint:
    x: float
    n: int
    m: int | None
    power: float
    stderr: float
    replications: int


@dataclass
class PowerCurve:
    points: list[PowerPoint]
    config: ScenarioConfig

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "power", "stderr", "n", "m", "scenario"])
        for p in self.points:
            writer.writerow([repr(p.x), repr(p.power), repr(p.stderr), p.n, "" if p.m is None else p.m, self.config.scenario_id])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def at(self, x: float, n: int) -> PowerPoint:
        for p in self.points:
            if p.n == n and math.isclose(p.x, x):
                return p
        raise KeyError((x, n))


def _split(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def _thread_count(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("PERMTEST_THREADS")
        threads = int(env) if env else min(4, os.cpu_count() or 1)
    return max(1, int(threads))


def _run_blocks(fn, blocks, threads: int | None):
    threads = _thread_count(threads)
    if threads == 1 or len(blocks) == 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, blocks))


def _one_sample_rejections(null: NullHypothesis, stats: dict, alpha: float) -> np.ndarray:
    reject = None
    for name, df in null.dof().items():
        hit = stats[name] > chi2_quantile(ChiSquared(df), alpha)
        reject = hit if reject is None else reject | hit
    return reject


def _simulate_one_sample(cfg: ScenarioConfig, null: NullHypothesis, n: int, truth: np.ndarray, rng, reps: int) -> dict:
    if cfg.kind == GAUSSIAN:
        x = truth + rng.standard_normal((reps, truth.size)) / math.sqrt(n)
        return gauss_statistics(x, n, null)
    counts = rng.multinomial(n, truth, size=reps)
    return cat_statistics(counts, null)


def _simulate_two_sample(cfg: ScenarioConfig, n: int, m: int, p: np.ndarray, q: np.ndarray, rng, reps: int) -> dict:
    lam = compile_lambda(cfg.lambda_rule)
    x = rng.multinomial(n, p, size=reps)
    y = rng.multinomial(m, q, size=reps)
    out = {"T_f": np.empty(reps), "T_g": np.empty(reps), "reject": np.empty(reps, bool), "d_x": np.empty(reps, int), "d_y": np.empty(reps, int)}
    for i in range(reps):
        r = two_sample_test(x[i], y[i], alpha=cfg.alpha, lambda_n=lam)
        out["T_f"][i] = r.statistics["T_f"]
        out["T_g"][i] = r.statistics["T_g"]
        out["reject"][i] = r.reject
        out["d_x"][i] = r.extra["d_x"]
        out["d_y"][i] = r.extra["d_y"]
    return out


def _effective_scale(cfg: ScenarioConfig, n: int) -> float:
    if cfg.kind == TWO_SAMPLE:
        m = cfg.m_for(n)
        return math.sqrt(2.0 * n * m / (n + m))
    return math.sqrt(n)


def _direction_seed(cfg: ScenarioConfig, x_idx: int, dir_idx: int) -> int:
    ss = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1, x_idx, dir_idx))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_power_curve(cfg: ScenarioConfig, threads: int | None = None) -> PowerCurve:
    """Empirical power at every (grid point, sample size), with Monte Carlo standard errors."""
    cfg.validate()
    ref = np.asarray(cfg.null_reference, dtype=float)
    null = None
    if cfg.kind == GAUSSIAN:
        null = NullHypothesis.gaussian(ref)
    elif cfg.kind == CATEGORICAL:
        null = NullHypothesis.categorical(ref)
    alt_kind = GAUSSIAN if cfg.kind == GAUSSIAN else CATEGORICAL

    blocks = []
    reps_per_dir = _split(cfg.replications, cfg.n_directions)
    for n_idx, n in enumerate(cfg.sample_sizes):
        scale = _effective_scale(cfg, n)
        for x_idx, x in enumerate(cfg.alternative_grid):
            for dir_idx, reps in enumerate(reps_per_dir):
                if reps:
                    blocks.append((n_idx, int(n), x_idx, float(x), dir_idx, reps, x / scale))

    def work(block):
        n_idx, n, x_idx, x, dir_idx, reps, target = block
        truth = alternative_at_distance(ref, target, _direction_seed(cfg, x_idx, dir_idx), alt_kind)
        rng = make_rng(cfg.seed, 2, n_idx, x_idx, dir_idx)
        if cfg.kind == TWO_SAMPLE:
            out = _simulate_two_sample(cfg, n, cfg.m_for(n), ref, truth, rng, reps)
            return int(out["reject"].sum())
        stats = _simulate_one_sample(cfg, null, n, truth, rng, reps)
        return int(_one_sample_rejections(null, stats, cfg.alpha).sum())

    hits = _run_blocks(work, blocks, threads)
    tally: dict[tuple[int, int], list[int]] = {}
    for block, h in zip(blocks, hits):
        key = (block[0], block[2])
        acc = tally.setdefault(key, [0, 0])
        acc[0] += h
        acc[1] += block[5]
    points = []
    for n_idx, n in enumerate(cfg.sample_sizes):
        for x_idx, x in enumerate(cfg.alternative_grid):
            h, reps = tally[(n_idx, x_idx)]
            power = h / reps
            points.append(
                PowerPoint(
                    x=float(x),
                    n=int(n),
                    m=cfg.m_for(n) if cfg.kind == TWO_SAMPLE else None,
                    power=power,
                    stderr=math.sqrt(power * (1.0 - power) / reps),
                    replications=reps,
                )
            )
    return PowerCurve(points=points, config=cfg)


# ---------------------------------------------------------------------------
# null calibration


@dataclass
class CalibrationRow:
    n: int
    statistic: str
    law: str
    ks: float
    type1_error: float
    replications: int
    dominance: float | None = None


def ks_distance(sample, cdf) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF of ``sample`` and ``cdf``."""
    x = np.sort(np.asarray(sample, dtype=float))
    r = x.size
    f = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, r + 1) / r - f
    lower = f - np.arange(r) / r
    return float(max(upper.max(), lower.max()))


def _laws(cfg: ScenarioConfig, null: NullHypothesis | None, n: int) -> dict:
    if cfg.kind == TWO_SAMPLE:
        k = len(cfg.null_reference)
        d = detect_null_partition(cfg.null_reference).d
        beta = cfg.m_for(n) / (n + cfg.m_for(n))
        full = MixtureNull(k, d, beta)
        split = MixtureNull(k, d, beta, common=False)
        return {
            "T_f": (f"chi2({d - 1})", lambda x: chi2_cdf(ChiSquared(d - 1), x)),
            "T_g": (f"mixture(k={k},d={d},beta={beta:.4g})", full.cdf),
            "T_g-T_f": (f"mixture(k={k},d={d},beta={beta:.4g},no-common)", split.cdf),
        }
    dofs = null.dof()
    laws = {name: (f"chi2({df})", lambda x, df=df: chi2_cdf(ChiSquared(df), x)) for name, df in dofs.items()}
    if "T_f" in dofs:
        diff_df = dofs["T_g"] - dofs["T_f"]
        laws["T_g-T_f"] = (f"chi2({diff_df})", lambda x: chi2_cdf(ChiSquared(diff_df), x))
    return laws


def run_null_calibration(cfg: ScenarioConfig, threads: int | None = None) -> list[CalibrationRow]:
    """Simulate the null at each sample size and compare statistics with their limit laws."""
    cfg.validate()
    ref = np.asarray(cfg.null_reference, dtype=float)
    null = None
    if cfg.kind == GAUSSIAN:
        null = NullHypothesis.gaussian(ref)
    elif cfg.kind == CATEGORICAL:
        null = NullHypothesis.categorical(ref)
    chunk = 2_000
    chunks = _split(cfg.replications, max(1, math.ceil(cfg.replications / chunk)))
    blocks = [(n_idx, int(n), c_idx, reps) for n_idx, n in enumerate(cfg.sample_sizes) for c_idx, reps in enumerate(chunks)]

    def work(block):
        n_idx, n, c_idx, reps = block
        rng = make_rng(cfg.seed, 3, n_idx, c_idx)
        if cfg.kind == TWO_SAMPLE:
            return _simulate_two_sample(cfg, n, cfg.m_for(n), ref, ref, rng, reps)
        stats = _simulate_one_sample(cfg, null, n, ref, rng, reps)
        stats["reject"] = _one_sample_rejections(null, stats, cfg.alpha)
        return stats

    results = _run_blocks(work, blocks, threads)
    rows = []
    for n_idx, n in enumerate(cfg.sample_sizes):
        parts = [r for b, r in zip(blocks, results) if b[0] == n_idx]
        merged = {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}
        if "T_f" in merged:
            merged["T_g-T_f"] = merged["T_g"] - merged["T_f"]
            dominance = float(np.mean(merged["T_g"] >= merged["T_f"]))
        else:
            dominance = None
        type1 = float(np.mean(merged["reject"]))
        for name, (label, cdf) in _laws(cfg, null, int(n)).items():
            rows.append(
                CalibrationRow(
                    n=int(n),
                    statistic=name,
                    law=label,
                    ks=ks_distance(merged[name], cdf),
                    type1_error=type1,
                    replications=int(merged["reject"].size),
                    dominance=dominance,
                )
            )
    return rows


def calibration_csv(rows: list[CalibrationRow], path=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "statistic", "law", "ks", "type1_error", "replications", "dominance"])
    for r in rows:
        writer.writerow([r.n, r.statistic, r.law, repr(r.ks), repr(r.type1_error), r.replications, "" if r.dominance is None else repr(r.dominance)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


# ---------------------------------------------------------------------------
# manifests


def version_string() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_manifest(cfg: ScenarioConfig, path, outputs: dict | None = None) -> dict:
    manifest = {"version": version_string(), "config": cfg.to_dict(), "outputs": outputs or {}}
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest
