"""Slow reference implementations and statistical diagnostics.

Everything here exists to check the fast paths: a direct-summation
autocovariance to validate the FFT route, a block-permutation test as the
classical baseline for comparison studies, and a Monte-Carlo variance
diagnostic that measures whether the plug-in variance estimate tracks the
true sampling variance of the coverage statistic.
"""

from __future__ import annotations

import numpy as np

from .covariance import CovarianceField, default_max_lag
from .errors import RegionMismatch, TooFewBlocks
from .fields import BinaryField
from .testing import gcops_test

MIN_BLOCKS = 20
PERMUTATION_REPS = 1000
_PERM_BATCH = 64


def autocov_bruteforce(field: BinaryField, max_lag: int | None = None) -> CovarianceField:
    """Empirical autocovariance by direct summation over all lags.

    Same estimator as :func:`gcops.covariance.autocov`, computed without any
    FFT: for each signed lag the overlapping products are summed with array
    slicing. Quadratic in the lag count, so keep ``max_lag`` small.
    """
    if max_lag is None:
        max_lag = default_max_lag(field.shape)
    p_hat = float(field.mask[field.region].mean())
    centered = (field.mask.astype(np.float64) - p_hat) * field.region
    region = field.region.astype(np.float64)
    shape = field.shape
    side = 2 * max_lag + 1
    values = np.zeros((side,) * field.dims)
    counts = np.zeros((side,) * field.dims, dtype=np.int64)
    for idx in np.ndindex(values.shape):
        lag = tuple(i - max_lag for i in idx)
        src = []
        dst = []
        fits = True
        for h, n in zip(lag, shape):
            if abs(h) >= n:
                fits = False
                break
            if h >= 0:
                src.append(slice(h, n))
                dst.append(slice(0, n - h))
            else:
                src.append(slice(0, n + h))
                dst.append(slice(-h, n))
        if not fits:
            continue
        src = tuple(src)
        dst = tuple(dst)
        count = float((region[src] * region[dst]).sum())
        counts[idx] = int(round(count))
        if counts[idx] > 0:
            values[idx] = (centered[src] * centered[dst]).sum() / count
    return CovarianceField(values=values, counts=counts, max_lag=max_lag)


def _bbox_slices(region: np.ndarray) -> tuple[slice, ...]:
    idx = np.nonzero(region)
    return tuple(slice(int(ax.min()), int(ax.max()) + 1) for ax in idx)


def _blockize(arr: np.ndarray, block: tuple[int, ...]) -> np.ndarray:
    """Reshape the complete-block part of ``arr`` to (n_blocks, block_size)."""
    nb = [n // b for n, b in zip(arr.shape, block)]
    trimmed = arr[tuple(slice(0, n * b) for n, b in zip(nb, block))]
    shape = []
    for n, b in zip(nb, block):
        shape.extend([n, b])
    parts = trimmed.reshape(shape)
    order = list(range(0, 2 * len(block), 2)) + list(range(1, 2 * len(block), 2))
    return parts.transpose(order).reshape(int(np.prod(nb)), int(np.prod(block)))


def permutation_test(
    a: BinaryField,
    b: BinaryField,
    block: tuple[int, ...],
    reps: int = PERMUTATION_REPS,
    seed=None,
) -> float:
    """Block-permutation baseline: unilateral p-value for positive correlation.

    The second channel is cut into rectangular blocks of the given size
    inside the region's bounding box; complete blocks are shuffled among
    themselves while any ragged remainder stays in place. The observed
    Pearson correlation between the binary channels is compared against the
    permutation distribution; the p-value is the add-one-smoothed fraction
    of permuted correlations strictly exceeding the observed one.

    Valid only when the correlation range of the data is shorter than the
    block, which is exactly the assumption the comparison studies violate on
    purpose.

    Raises
    ------
    TooFewBlocks
        If fewer than 20 complete blocks fit in the bounding box.
    """
    if not np.array_equal(a.region, b.region):
        raise RegionMismatch("channels live on different regions")
    if len(block) != a.dims or any(s < 1 for s in block):
        raise ValueError(f"block {block} does not match a {a.dims}D image")
    box = _bbox_slices(a.region)
    am = a.mask[box].astype(np.float64)
    bm = b.mask[box].astype(np.float64)
    nb = [n // s for n, s in zip(am.shape, block)]
    n_blocks = int(np.prod(nb))
    if n_blocks < MIN_BLOCKS:
        raise TooFewBlocks(
            f"{n_blocks} complete blocks of size {block} in box {am.shape}, "
            f"need at least {MIN_BLOCKS}"
        )

    n = am.size
    pa = am.mean()
    pb = bm.mean()
    va = pa * (1.0 - pa)
    vb = pb * (1.0 - pb)
    if va == 0.0 or vb == 0.0:
        return 1.0

    def corr(s_ab: np.ndarray) -> np.ndarray:
        return (s_ab / n - pa * pb) / np.sqrt(va * vb)

    a_blocks = _blockize(am, block)
    b_blocks = _blockize(bm, block)
    # products in the ragged remainder are unaffected by the shuffle
    fixed = float((am * bm).sum()) - float((a_blocks * b_blocks).sum())
    r_obs = float(corr(np.array((a_blocks * b_blocks).sum() + fixed)))

    rng = np.random.default_rng(seed)
    exceed = 0
    done = 0
    while done < reps:
        batch = min(_PERM_BATCH, reps - done)
        perms = np.array([rng.permutation(n_blocks) for _ in range(batch)])
        permuted = b_blocks[perms]  # (batch, n_blocks, block_size)
        s_ab = np.einsum("jk,bjk->b", a_blocks, permuted) + fixed
        exceed += int(np.sum(corr(s_ab) > r_obs))
        done += batch
    return (1.0 + exceed) / (reps + 1.0)


def variance_check(
    make_pair,
    reps: int,
    seed=None,
    **test_options,
) -> dict:
    """Monte-Carlo audit of the plug-in variance estimate.

    Draws ``reps`` independent pairs from ``make_pair(rng)`` and compares
    the empirical variance of the coverage statistic against the average
    plug-in estimate S / n. A calibrated estimator gives a ratio near 1.

    Returns
    -------
    dict
        ``reps``, ``n``, ``var_d`` (empirical variance of d),
        ``mean_s_over_n`` (average plug-in variance), ``ratio``
        (var_d / mean_s_over_n) and ``mean_delta``.
    """
    from .simulate import spawn_rngs

    rngs = spawn_rngs(seed, reps)
    d_values = np.empty(reps)
    s_over_n = np.empty(reps)
    deltas = np.empty(reps)
    n = None
    for i, rng in enumerate(rngs):
        a, b = make_pair(rng)
        report = gcops_test(a, b, **test_options)
        d_values[i] = report.stats.d_hat
        s_over_n[i] = report.s_hat / report.stats.n
        deltas[i] = report.delta
        n = report.stats.n
    var_d = float(np.var(d_values, ddof=1))
    mean_s = float(np.mean(s_over_n))
    return {
        "reps": reps,
        "n": n,
        "var_d": var_d,
        "mean_s_over_n": mean_s,
        "ratio": var_d / mean_s,
        "mean_delta": float(np.mean(deltas)),
    }


def agreement_rate(
    reports_p: np.ndarray, oracle_p: np.ndarray, level: float = 0.05
) -> float:
    """Fraction of cases where two testing routes agree on the decision."""
    a = np.asarray(reports_p) < level
    b = np.asarray(oracle_p) < level
    return float(np.mean(a == b))


__all__ = [
    "autocov_bruteforce",
    "permutation_test",
    "variance_check",
    "agreement_rate",
]
