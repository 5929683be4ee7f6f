"""Empirical autocovariance of binary fields over a ball of integer lags.

The estimator at lag h averages products of centered indicators over every
ordered site pair of the region with offset h, normalized by the number of
such pairs. It is computed with zero-padded frequency-domain correlation, so
cost is a few FFTs regardless of the lag radius; a literal shifted-sum oracle
lives in :mod:`gcops.oracles` for verification.

No isotropy is assumed anywhere: values are kept on the full signed lag cube
and downstream sums run over integer lag balls, never radial profiles.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as _fft

from .errors import EmptyRegion, LagTooLarge, ZeroVariance
from .fields import BinaryField, coverage

Lag = tuple[int, ...]

DELTA_THRESHOLD = 0.1
MAX_LAG_CAP = 64


def fft_workers() -> int:
    """Worker count for FFT calls, from the GCOPS_THREADS variable."""
    try:
        return max(1, int(os.environ.get("GCOPS_THREADS", "1")))
    except ValueError:
        return 1


def default_max_lag(shape: tuple[int, ...]) -> int:
    """Default stored-ball radius: min extent over 4, capped at 64.

    Keeps lag counts large so the pair-average estimator stays stable.
    """
    return min(MAX_LAG_CAP, min(shape) // 4)


@lru_cache(maxsize=16)
def lag_norms(max_lag: int, dims: int) -> np.ndarray:
    """Euclidean norm of every lag in the signed cube, shape (2L+1,)*dims."""
    ax = np.arange(-max_lag, max_lag + 1, dtype=float) ** 2
    g = np.zeros((2 * max_lag + 1,) * dims)
    for i in range(dims):
        sh = [1] * dims
        sh[i] = 2 * max_lag + 1
        g = g + ax.reshape(sh)
    g = np.sqrt(g)
    g.setflags(write=False)
    return g


@dataclass(frozen=True, eq=False)
class CovarianceField:
    """Autocovariance values and pair counts on the signed lag cube.

    ``values[idx]`` holds the estimate at lag ``h = idx - max_lag`` per axis;
    ``counts`` holds the number of ordered site pairs at that offset. Values
    are zero wherever the count is zero. Lags of norm greater than ``max_lag``
    sit in the cube corners and are retained, but the stored ball (norm at
    most ``max_lag``) is what the truncation-radius selection and ball sums
    consume.
    """

    values: np.ndarray
    counts: np.ndarray
    max_lag: int

    def __post_init__(self):
        side = 2 * self.max_lag + 1
        if self.values.shape != (side,) * self.values.ndim:
            raise ValueError("values cube does not match max_lag")
        if self.values.shape != self.counts.shape:
            raise ValueError("values and counts shapes differ")

    @property
    def dims(self) -> int:
        return self.values.ndim

    @property
    def c0(self) -> float:
        """Value at lag zero, p_hat * (1 - p_hat) up to rounding."""
        return float(self.values[(self.max_lag,) * self.dims])

    def _index(self, lag: Lag) -> tuple[int, ...]:
        if len(lag) != self.dims:
            raise ValueError("lag dimensionality mismatch")
        if any(abs(h) > self.max_lag for h in lag):
            raise LagTooLarge(f"lag {lag} outside stored cube (max_lag={self.max_lag})")
        return tuple(int(h) + self.max_lag for h in lag)

    def value(self, lag: Lag) -> float:
        return float(self.values[self._index(lag)])

    def count(self, lag: Lag) -> int:
        return int(self.counts[self._index(lag)])

    def norms(self) -> np.ndarray:
        return lag_norms(self.max_lag, self.dims)


def _padded_shape(shape: tuple[int, ...], max_lag: int) -> tuple[int, ...]:
    # Pad so circular correlation never wraps for |h| <= max_lag, and so the
    # signed cube can be sliced out without index collisions on thin axes.
    return tuple(
        _fft.next_fast_len(max(n + max_lag, 2 * max_lag + 1)) for n in shape
    )


def _autocorr(arr: np.ndarray, padded: tuple[int, ...], max_lag: int) -> np.ndarray:
    """Non-circular autocorrelation of ``arr``, cropped to the signed cube."""
    w = fft_workers()
    spec = _fft.rfftn(arr, padded, workers=w)
    full = _fft.irfftn(spec * np.conj(spec), padded, workers=w)
    L = max_lag
    idx = np.ix_(*[np.r_[m - L : m, 0 : L + 1] for m in padded])
    return np.ascontiguousarray(full[idx])


def _rect_counts(shape: tuple[int, ...], max_lag: int) -> np.ndarray:
    # Full-rectangle regions have the closed form prod_i (N_i - |h_i|)+.
    out = np.ones((2 * max_lag + 1,) * len(shape), dtype=np.int64)
    offs = np.arange(-max_lag, max_lag + 1)
    for i, n in enumerate(shape):
        sh = [1] * len(shape)
        sh[i] = 2 * max_lag + 1
        out = out * np.maximum(n - np.abs(offs), 0).reshape(sh)
    return out


_MASK_COUNT_CACHE: dict[tuple, np.ndarray] = {}


def lag_counts(region: np.ndarray, max_lag: int) -> np.ndarray:
    """Number of ordered region site pairs at every lag of the signed cube.

    Parameters
    ----------
    region : ndarray of bool
        Observation-region indicator.
    max_lag : int
        Radius of the stored cube.

    Returns
    -------
    ndarray of int64, shape (2*max_lag+1,)*d
        ``result[idx]`` is the pair count at offset ``idx - max_lag``.
    """
    region = np.asarray(region, dtype=bool)
    if max_lag < 0:
        raise ValueError("max_lag must be non-negative")
    if region.all():
        return _rect_counts(region.shape, max_lag)
    key = (region.shape, max_lag, hash(region.tobytes()))
    cached = _MASK_COUNT_CACHE.get(key)
    if cached is not None:
        return cached
    padded = _padded_shape(region.shape, max_lag)
    raw = _autocorr(region.astype(np.float64), padded, max_lag)
    counts = np.rint(raw).astype(np.int64)
    if len(_MASK_COUNT_CACHE) >= 8:
        _MASK_COUNT_CACHE.pop(next(iter(_MASK_COUNT_CACHE)))
    _MASK_COUNT_CACHE[key] = counts
    return counts


def autocov(
    field: BinaryField,
    max_lag: int | None = None,
    counts: np.ndarray | None = None,
) -> CovarianceField:
    """Empirical autocovariance of a binary field over the signed lag cube.

    The indicator is centered by the region mean and zeroed outside the
    region; the numerator at lag h is then the plain correlation sum, and the
    estimate divides it by the pair count at h. Lags with no pairs get value
    zero by convention.

    Parameters
    ----------
    field : BinaryField
    max_lag : int, optional
        Stored radius; defaults to ``min(shape) // 4`` capped at 64.
    counts : ndarray, optional
        Precomputed ``lag_counts(field.region, max_lag)``. Two channels on a
        common region share their counts, so callers testing a pair compute
        them once.

    Returns
    -------
    CovarianceField
    """
    if max_lag is None:
        max_lag = default_max_lag(field.shape)
    if max_lag > max(field.shape) - 1:
        raise LagTooLarge(
            f"max_lag {max_lag} exceeds max extent - 1 = {max(field.shape) - 1}"
        )
    if not field.region.any():
        raise EmptyRegion("observation region is empty")
    p_hat = coverage(field)
    centered = (field.mask.astype(np.float64) - p_hat) * field.region
    padded = _padded_shape(field.shape, max_lag)
    num = _autocorr(centered, padded, max_lag)
    if counts is None:
        counts = lag_counts(field.region, max_lag)
    values = np.divide(num, counts, out=np.zeros_like(num), where=counts > 0)
    # enforce exact h <-> -h symmetry, which FFT rounding can break in the
    # last bit
    rev = (slice(None, None, -1),) * values.ndim
    values = 0.5 * (values + values[rev])
    return CovarianceField(values=values, counts=counts, max_lag=max_lag)


def _common_cubes(
    c1: CovarianceField, c2: CovarianceField
) -> tuple[np.ndarray, np.ndarray, int]:
    """Crop two cubes to their shared radius."""
    if c1.dims != c2.dims:
        raise ValueError("covariance fields have different dimensionality")
    L = min(c1.max_lag, c2.max_lag)

    def crop(c: CovarianceField) -> np.ndarray:
        k = c.max_lag - L
        if k == 0:
            return c.values
        sl = (slice(k, -k),) * c.dims
        return c.values[sl]

    return crop(c1), crop(c2), L


def select_delta(
    c1: CovarianceField,
    c2: CovarianceField,
    threshold: float = DELTA_THRESHOLD,
    mode: str = "max",
) -> float:
    """Truncation radius: how far both normalized autocovariances stay high.

    A stored lag h qualifies when both ratios C_i(h)/C_i(0) exceed
    ``threshold``. In the default ``"max"`` mode the result is the largest
    Euclidean norm among qualifying lags of the stored ball (the lag zero
    ratio is 1, so the result is at least 0). The ``"prefix"`` mode instead
    returns the largest radius r such that every stored lag with norm at most
    r qualifies; it is the conservative reading, kept for sensitivity checks.

    Raises
    ------
    ZeroVariance
        If either field has non-positive variance at lag zero.
    """
    if c1.c0 <= 0 or c2.c0 <= 0:
        raise ZeroVariance(
            f"lag-zero variance not positive (c0_1={c1.c0:.6g}, c0_2={c2.c0:.6g})"
        )
    v1, v2, L = _common_cubes(c1, c2)
    norms = lag_norms(L, c1.dims)
    stored = norms <= L
    qualify = (v1 / c1.c0 > threshold) & (v2 / c2.c0 > threshold) & stored
    if mode == "max":
        if not qualify.any():
            return 0.0
        return float(norms[qualify].max())
    if mode == "prefix":
        shells = np.unique(norms[stored])
        delta = 0.0
        for r in shells:
            shell = stored & (norms == r)
            if not qualify[shell].all():
                break
            delta = float(r)
        return delta
    raise ValueError(f"unknown mode {mode!r}")
