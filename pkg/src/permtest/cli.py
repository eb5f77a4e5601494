"""Command-line interface.

Exit codes: 0 when the test fails to reject (or a non-test command
succeeds), 1 when the test rejects, 2 on any error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, PermTestError
from .harness import (
    ScenarioConfig,
    calibration_csv,
    run_null_calibration,
    run_power_curve,
    scenario,
    version_string,
    write_manifest,
)
from .lambda_rule import compile_lambda
from .stat_tests import (
    NullHypothesis,
    TestReport,
    cat_test,
    cat_test_degenerate,
    gauss_test,
    gauss_test_degenerate,
    two_sample_test,
)
from .thresholds import noncentral_null_threshold, optimal_threshold_cat, optimal_threshold_gauss

SCHEMA_VERSION = 1
Q_RENORM_TOL = 1e-6
EXIT_ACCEPT, EXIT_REJECT, EXIT_ERROR = 0, 1, 2


class CliError(Exception):
    """Malformed command-line input."""


# ---------------------------------------------------------------------------
# input parsing


def parse_vector(text: str, name: str) -> np.ndarray:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"{name}: expected comma-separated numbers, got {text!r}") from exc
    if len(values) < 2:
        raise CliError(f"{name}: need at least 2 values")
    if not all(math.isfinite(v) for v in values):
        raise CliError(f"{name}: values must be finite")
    return np.array(values)


def _parse_count(text: str, where: str) -> int:
    try:
        value = float(text)
    except ValueError as exc:
        raise CliError(f"{where}: count {text!r} is not a number") from exc
    if not math.isfinite(value) or value < 0 or value != int(value):
        raise CliError(f"{where}: count {text!r} must be a nonnegative integer")
    return int(value)


def read_counts(path, columns: tuple[str, ...]) -> tuple[list[str], np.ndarray]:
    """Read a counts CSV with header ``category,<columns...>``.

    Returns the category labels and an integer array of shape
    ``(k, len(columns))``.
    """
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise CliError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    expected = ["category", *columns]
    if header != expected:
        raise CliError(f"{path}: header must be {','.join(expected)}, got {','.join(header)}")
    labels, counts = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(expected):
            raise CliError(f"{path}:{lineno}: expected {len(expected)} fields, got {len(row)}")
        labels.append(row[0].strip())
        counts.append([_parse_count(c.strip(), f"{path}:{lineno}") for c in row[1:]])
    if len(labels) < 2:
        raise CliError(f"{path}: need at least 2 categories")
    return labels, np.array(counts, dtype=np.int64)


def normalize_null(q: np.ndarray) -> tuple[np.ndarray, list[str]]:
    """Renormalize ``q`` if it is off by more than the tolerance, with a warning."""
    if np.any(q <= 0):
        raise CliError("--null: probabilities must be positive")
    total = float(q.sum())
    if abs(total - 1.0) > Q_RENORM_TOL:
        return q / total, [f"null probabilities summed to {total:.10g}; renormalized"]
    return q / total, []


# ---------------------------------------------------------------------------
# output


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def report_document(report: TestReport, categories=None, seed=None) -> dict:
    doc = report.to_dict()
    doc["schema_version"] = SCHEMA_VERSION
    doc["version"] = __version__
    if categories is not None:
        doc["categories"] = list(categories)
    if seed is not None:
        doc["seed"] = seed
    return doc


def parse_report(text: str) -> TestReport:
    """Rebuild a :class:`TestReport` from an emitted JSON document."""
    return TestReport.from_dict(json.loads(text))


def _emit(obj, stream=None) -> None:
    stream = stream or sys.stdout
    stream.write(json.dumps(obj, indent=2, default=_json_default, allow_nan=False) + "\n")


def _decision(report: TestReport) -> int:
    return EXIT_REJECT if report.reject else EXIT_ACCEPT


# ---------------------------------------------------------------------------
# commands


def cmd_test_cat(args) -> int:
    labels, counts = read_counts(args.counts, ("count",))
    counts = counts[:, 0]
    q, warnings = normalize_null(parse_vector(args.null, "--null"))
    if q.size != counts.size:
        raise CliError(f"--null has {q.size} entries but the counts file has {counts.size} categories")
    null = NullHypothesis.categorical(q)
    if args.degenerate == "force-flat":
        report = cat_test(counts, null, args.alpha)
    elif null.degenerate:
        report = cat_test_degenerate(counts, null, args.alpha)
    else:
        report = cat_test(counts, null, args.alpha)
    report.diagnostics.warnings[:0] = warnings
    _emit(report_document(report, categories=labels))
    return _decision(report)


def cmd_test_gauss(args) -> int:
    x = parse_vector(args.x, "--x")
    mu = parse_vector(args.null, "--null")
    if x.size != mu.size:
        raise CliError(f"--x has {x.size} entries but --null has {mu.size}")
    if args.n < 1:
        raise CliError("--n must be >= 1")
    null = NullHypothesis.gaussian(mu)
    if args.degenerate == "force-flat" or not null.degenerate:
        report = gauss_test(x, args.n, null, args.alpha)
    else:
        report = gauss_test_degenerate(x, args.n, null, args.alpha)
    _emit(report_document(report))
    return _decision(report)


def cmd_test_two_sample(args) -> int:
    labels, counts = read_counts(args.counts, ("count_x", "count_y"))
    rule = compile_lambda(args.lambda_rule)
    report = two_sample_test(counts[:, 0], counts[:, 1], alpha=args.alpha, lambda_n=rule, anchor=args.anchor)
    report.extra["lambda_rule"] = rule.expression
    _emit(report_document(report, categories=labels))
    return _decision(report)


def cmd_threshold(args) -> int:
    if args.kind == "noncentral":
        if args.tau_sq is None:
            raise CliError("--kind noncentral needs --tau-sq")
        t = noncentral_null_threshold(args.k, args.tau_sq, args.alpha)
        _emit({"kind": "noncentral", "k": args.k, "tau_sq": args.tau_sq, "alpha": args.alpha, "t_star": t, "version": __version__})
        return EXIT_ACCEPT
    if args.delta is None:
        raise CliError(f"--kind {args.kind} needs --delta")
    solver = optimal_threshold_gauss if args.kind == "gauss" else optimal_threshold_cat
    spec = solver(args.k, args.delta)
    _emit({"kind": spec.kind, "k": spec.k, "delta": spec.delta, "t_star": spec.t_star, "total_error": spec.total_error, "version": __version__})
    return EXIT_ACCEPT


def _parse_list(text: str, cast, name: str) -> list:
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"{name}: cannot parse {text!r}") from exc


def load_config(args) -> ScenarioConfig:
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        cfg = ScenarioConfig.from_dict(data)
    else:
        cfg = scenario(args.scenario)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.reps is not None:
        cfg.replications = args.reps
    if args.sizes is not None:
        cfg.sample_sizes = _parse_list(args.sizes, int, "--sizes")
    if args.grid is not None:
        cfg.alternative_grid = _parse_list(args.grid, float, "--grid")
    if args.directions is not None:
        cfg.n_directions = args.directions
    cfg.validate()
    return cfg


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    if args.calibrate:
        text = calibration_csv(run_null_calibration(cfg, threads=args.threads))
    else:
        text = run_power_curve(cfg, threads=args.threads).to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    summary = {"seed": cfg.seed, "scenario": cfg.scenario_id, "out": args.out, "version": version_string()}
    if args.manifest:
        write_manifest(cfg, args.manifest, {"csv": args.out, "mode": "calibration" if args.calibrate else "power"})
        summary["manifest"] = args.manifest
    _emit(summary, sys.stderr if not args.out else sys.stdout)
    return EXIT_ACCEPT


# ---------------------------------------------------------------------------
# parser


def _alpha(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return value


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="permtest", description="Permutation-invariant goodness-of-fit tests.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("test-cat", help="one-sample categorical test")
    p.add_argument("--counts", required=True, help="CSV with header category,count")
    p.add_argument("--null", required=True, help="comma-separated null probabilities q1,...,qk")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--degenerate", choices=("auto", "force-flat"), default="auto")
    p.set_defaults(func=cmd_test_cat)

    p = sub.add_parser("test-gauss", help="Gaussian mean-vector test")
    p.add_argument("--x", required=True, help="comma-separated sample mean x1,...,xk")
    p.add_argument("--null", required=True, help="comma-separated reference mu1,...,muk")
    p.add_argument("--n", type=int, required=True, help="sample size behind the mean")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--degenerate", choices=("auto", "force-flat"), default="auto")
    p.set_defaults(func=cmd_test_gauss)

    p = sub.add_parser("test-two-sample", help="two-sample categorical test")
    p.add_argument("--counts", required=True, help="CSV with header category,count_x,count_y")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--lambda", dest="lambda_rule", default="log(n)", help="clustering resolution as a function of n")
    p.add_argument("--anchor", choices=("first", "previous"), default="first")
    p.set_defaults(func=cmd_test_two_sample)

    p = sub.add_parser("threshold", help="error-minimizing or noncentral-null threshold")
    p.add_argument("--kind", choices=("gauss", "cat", "noncentral"), required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--delta", type=float)
    p.add_argument("--tau-sq", dest="tau_sq", type=float)
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("simulate", help="Monte Carlo power curve or null calibration")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", type=int, choices=range(1, 6))
    src.add_argument("--config", help="JSON scenario configuration")
    p.add_argument("--seed", type=int, default=None, help="run seed (default: config seed, 0 for built-in scenarios)")
    p.add_argument("--reps", type=int)
    p.add_argument("--sizes", help="comma-separated sample sizes")
    p.add_argument("--grid", help="comma-separated x values")
    p.add_argument("--directions", type=int)
    p.add_argument("--threads", type=int, help="worker threads (default: PERMTEST_THREADS or up to 4)")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--manifest", help="JSON run manifest path")
    p.add_argument("--calibrate", action="store_true", help="null calibration table instead of a power curve")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits for --help/--version (0) and usage errors (2).
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CliError, PermTestError, ValueError, OSError) as exc:
        print(f"permtest: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
