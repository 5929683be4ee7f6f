"""GcoPS: a parameter-free independence test between segmented images.

The test compares the joint coverage of two binary images against the
product of their marginal coverages, normalized by a variance estimated
from the empirical autocovariances of the two channels. Under independence
the statistic is standard normal, which gives p-values without calibration
runs, permutations, or tuning.

Typical use:

>>> import gcops
>>> a = gcops.BinaryField.from_mask(mask_a)
>>> b = gcops.BinaryField.from_mask(mask_b)
>>> report = gcops.gcops_test(a, b)
>>> report.p_coloc
"""

from .covariance import (
    CovarianceField,
    autocov,
    default_max_lag,
    lag_counts,
    select_delta,
)
from .errors import (
    DegenerateChannel,
    DegenerateHistogram,
    DomainError,
    EmbeddingFailure,
    EmptyForeground,
    EmptyBackground,
    EmptyRegion,
    GcopsError,
    LagTooLarge,
    LengthMismatch,
    NonPositiveVariance,
    NoScores,
    RegionMismatch,
    TooFewBlocks,
    WindowLargerThanImage,
    ZeroVariance,
)
from .fields import BinaryField, CoverageStats, coverage, empirical_d
from .oracles import (
    agreement_rate,
    autocov_bruteforce,
    permutation_test,
    variance_check,
)
from .segment import otsu, threshold
from .simulate import (
    LevelSetParams,
    SpotParams,
    SpotSample,
    binary_correlation,
    rho0_for_binary_correlation,
    sample_grf,
    simulate_level_sets,
    simulate_spots,
    spawn_rngs,
)
from .testing import TestReport, gcops_test, s_hat
from .windows import (
    ScanResult,
    ShiftCurve,
    WindowResult,
    WindowSpec,
    scan,
    shift_scan,
    smooth_scores,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # fields
    "BinaryField",
    "CoverageStats",
    "coverage",
    "empirical_d",
    # covariance
    "CovarianceField",
    "autocov",
    "default_max_lag",
    "lag_counts",
    "select_delta",
    # test
    "TestReport",
    "gcops_test",
    "s_hat",
    # windows
    "WindowSpec",
    "WindowResult",
    "ScanResult",
    "ShiftCurve",
    "scan",
    "smooth_scores",
    "shift_scan",
    # segmentation
    "threshold",
    "otsu",
    # simulation
    "LevelSetParams",
    "SpotParams",
    "SpotSample",
    "sample_grf",
    "simulate_level_sets",
    "simulate_spots",
    "binary_correlation",
    "rho0_for_binary_correlation",
    "spawn_rngs",
    # oracles
    "agreement_rate",
    "autocov_bruteforce",
    "permutation_test",
    "variance_check",
    # errors
    "GcopsError",
    "EmptyRegion",
    "RegionMismatch",
    "DegenerateChannel",
    "LagTooLarge",
    "ZeroVariance",
    "NonPositiveVariance",
    "DomainError",
    "EmbeddingFailure",
    "WindowLargerThanImage",
    "LengthMismatch",
    "NoScores",
    "TooFewBlocks",
    "DegenerateHistogram",
    "EmptyForeground",
    "EmptyBackground",
]
