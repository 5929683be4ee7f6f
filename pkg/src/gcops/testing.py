"""The independence test statistic, its variance normalizer, and p-values.

Under independence of the two channels, sqrt(n) * d_hat is asymptotically
centered normal with variance S = sum over lags of C_1(h) * C_2(h), so the
studentized statistic t = sqrt(n) * d_hat / sqrt(S_hat(delta)) is compared
against the standard normal. The truncation radius delta is chosen from the
data unless overridden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage
from scipy.special import ndtr, ndtri

from .covariance import (
    CovarianceField,
    DELTA_THRESHOLD,
    _common_cubes,
    autocov,
    default_max_lag,
    lag_counts,
    lag_norms,
    select_delta,
)
from .errors import DomainError, LagTooLarge, NonPositiveVariance
from .fields import BinaryField, CoverageStats, empirical_d

SIZE_RULE_FACTOR = 25.0


def phi(x: float) -> float:
    """Standard normal CDF, accurate into the far tails."""
    return float(ndtr(x))


def phi_inv(q: float) -> float:
    """Standard normal quantile for q in the open unit interval."""
    if not 0.0 < q < 1.0:
        raise DomainError(f"quantile argument {q!r} outside (0, 1)")
    return float(ndtri(q))


def s_hat(c1: CovarianceField, c2: CovarianceField, delta: float) -> float:
    """Truncated lag-ball sum of the product of two autocovariances.

    Sums C_1(h) * C_2(h) over every integer lag with Euclidean norm at most
    ``delta``, including h = 0 and both signs of each offset.

    Raises
    ------
    LagTooLarge
        If ``delta`` exceeds the stored ball of either field.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    v1, v2, L = _common_cubes(c1, c2)
    if delta > L:
        raise LagTooLarge(f"delta {delta:.6g} exceeds stored ball radius {L}")
    ball = lag_norms(L, c1.dims) <= delta
    return float(np.sum(v1[ball] * v2[ball]))


@dataclass(frozen=True)
class TestReport:
    """Everything the test produced, in one immutable record."""

    stats: CoverageStats
    delta: float
    s_hat: float
    t: float
    p_bilateral: float
    p_coloc: float
    p_anticoloc: float
    max_lag_used: int
    warnings: tuple[str, ...] = dc_field(default_factory=tuple)


def _mean_object_volume(mask: np.ndarray) -> float:
    """Foreground volume over connected-component count (2d-neighbor links)."""
    vol = int(np.count_nonzero(mask))
    if vol == 0:
        return 0.0
    _, ncomp = ndimage.label(mask)
    return vol / max(ncomp, 1)


def _size_warnings(a: BinaryField, b: BinaryField, n: int) -> list[str]:
    # Advisory: the normal approximation wants the window to dominate the
    # objects, n >= 25 * (average object diameter)^d. With diameter estimated
    # as (volume/count)^(1/d), the bound reduces to 25 * mean object volume.
    out = []
    for name, f in (("first", a), ("second", b)):
        mean_vol = _mean_object_volume(f.mask & f.region)
        if mean_vol > 0 and n < SIZE_RULE_FACTOR * mean_vol:
            out.append(
                f"region of {n} sites is below {SIZE_RULE_FACTOR:g}x the mean "
                f"object volume {mean_vol:.1f} of the {name} channel; the "
                "normal approximation may be unreliable"
            )
    return out


def gcops_test(
    a: BinaryField,
    b: BinaryField,
    *,
    delta: float | None = None,
    max_lag: int | None = None,
    delta_threshold: float = DELTA_THRESHOLD,
    delta_mode: str = "max",
) -> TestReport:
    """Test the two binary channels for independence.

    Parameters
    ----------
    a, b : BinaryField
        Channels on a common observation region.
    delta : float, optional
        Truncation radius override. By default the radius is selected from
        the data: the largest stored lag norm at which both normalized
        autocovariances still exceed ``delta_threshold``.
    max_lag : int, optional
        Stored-ball radius for the autocovariance estimates; defaults to
        ``min(shape) // 4`` capped at 64.
    delta_threshold : float
        Normalized-covariance level defining the selection rule.
    delta_mode : str
        ``"max"`` (default) or ``"prefix"``; see
        :func:`gcops.covariance.select_delta`.

    Returns
    -------
    TestReport
        Statistic, truncation radius, variance normalizer, and the bilateral
        and the two unilateral p-values. The unilateral colocalization
        p-value is small when the channels overlap more than independence
        allows; the anti-colocalization p-value is small when they avoid
        each other.

    Raises
    ------
    DegenerateChannel
        If either channel is all-foreground or all-background.
    NonPositiveVariance
        If the variance estimate is not positive (possible in small samples
        since covariance products are signed); clamping would invalidate the
        normal calibration, so this is an error.
    """
    stats = empirical_d(a, b)
    if max_lag is None:
        max_lag = default_max_lag(a.shape)

    counts = lag_counts(a.region, max_lag)
    c1 = autocov(a, max_lag, counts=counts)
    c2 = autocov(b, max_lag, counts=counts)

    warnings: list[str] = []
    if delta is None:
        delta = select_delta(c1, c2, threshold=delta_threshold, mode=delta_mode)
        if delta > max_lag - 1:
            warnings.append(
                f"truncation radius {delta:.3g} reaches the stored ball "
                f"(max_lag={max_lag}); consider a larger max_lag"
            )
    s = s_hat(c1, c2, delta)
    if s <= 0:
        raise NonPositiveVariance(s, delta, c1.c0, c2.c0)
    t = math.sqrt(stats.n) * stats.d_hat / math.sqrt(s)
    warnings.extend(_size_warnings(a, b, stats.n))
    return TestReport(
        stats=stats,
        delta=float(delta),
        s_hat=s,
        t=t,
        p_bilateral=float(2.0 * ndtr(-abs(t))),
        p_coloc=float(ndtr(-t)),
        p_anticoloc=float(ndtr(t)),
        max_lag_used=max_lag,
        warnings=tuple(warnings),
    )
