"""Permutation-invariant goodness-of-fit tests for categorical data and Gaussian means."""

__version__ = "0.1.0"

from .distributions import ChiSquared, MixtureNull, chi2_cdf, chi2_quantile, chi2_sf, make_rng
from .errors import (
    ConfigError,
    DegenerateNodes,
    EmptySample,
    InfeasibleDistance,
    InvalidPartition,
    InvalidShape,
    LengthMismatch,
    NotAProbabilityVector,
    PermTestError,
)
from .metrics import Matching, cat_distance, gauss_distance
from .polynomials import e_matrix, elementary_symmetric, f_coefficients
from .stat_tests import (
    NullHypothesis,
    Partition,
    TestReport,
    cat_test,
    cat_test_degenerate,
    condition_diagnostics,
    detect_null_partition,
    gauss_test,
    gauss_test_degenerate,
    run_cat_test,
    run_gauss_test,
    two_sample_test,
)
from .thresholds import noncentral_null_threshold, optimal_threshold_cat, optimal_threshold_gauss

__all__ = [
    "ChiSquared",
    "ConfigError",
    "DegenerateNodes",
    "EmptySample",
    "InfeasibleDistance",
    "InvalidPartition",
    "InvalidShape",
    "LengthMismatch",
    "Matching",
    "MixtureNull",
    "NotAProbabilityVector",
    "NullHypothesis",
    "Partition",
    "PermTestError",
    "TestReport",
    "cat_distance",
    "cat_test",
    "cat_test_degenerate",
    "chi2_cdf",
    "chi2_quantile",
    "chi2_sf",
    "condition_diagnostics",
    "detect_null_partition",
    "e_matrix",
    "elementary_symmetric",
    "f_coefficients",
    "gauss_distance",
    "gauss_test",
    "gauss_test_degenerate",
    "make_rng",
    "noncentral_null_threshold",
    "optimal_threshold_cat",
    "optimal_threshold_gauss",
    "run_cat_test",
    "run_gauss_test",
    "two_sample_test",
]
