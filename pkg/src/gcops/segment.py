"""Segmentation of grayscale images into binary fields."""

from __future__ import annotations

import warnings as _warnings

import numpy as np

from .errors import DegenerateHistogram, EmptyBackground, EmptyForeground
from .fields import BinaryField

OTSU_BINS = 256


def threshold(
    image: np.ndarray, tau: float, region: np.ndarray | None = None
) -> BinaryField:
    """Binary field with foreground where the image exceeds ``tau``.

    Parameters
    ----------
    image : ndarray
        Grayscale intensities, 2D or 3D.
    tau : float
        Strict lower bound for foreground intensity.
    region : ndarray of bool, optional
        Observation region; full rectangle when omitted.

    Warns
    -----
    EmptyForeground / EmptyBackground
        When the mask is empty or covers the whole region. The downstream
        test rejects such fields, so segmentation only warns.
    """
    image = np.asarray(image)
    if region is None:
        region = np.ones(image.shape, dtype=bool)
    else:
        region = np.asarray(region, dtype=bool)
    mask = (image > tau) & region
    fg = int(np.count_nonzero(mask))
    if fg == 0:
        _warnings.warn(
            f"threshold {tau:g} leaves no foreground", EmptyForeground, stacklevel=2
        )
    elif fg == int(np.count_nonzero(region)):
        _warnings.warn(
            f"threshold {tau:g} leaves no background", EmptyBackground, stacklevel=2
        )
    return BinaryField(mask, region)


def otsu(image: np.ndarray, bins: int = OTSU_BINS) -> float:
    """Threshold maximizing between-class variance on a histogram.

    Returns an intensity such that ``image > result`` separates the two
    classes. Uses ``bins`` equal-width bins spanning the image range.

    Raises
    ------
    DegenerateHistogram
        If the image has fewer than two distinct intensity levels.
    """
    image = np.asarray(image, dtype=np.float64)
    lo, hi = float(image.min()), float(image.max())
    if not hi > lo:
        raise DegenerateHistogram("image has a single intensity level")
    hist, edges = np.histogram(image, bins=bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    w = hist.astype(np.float64)
    total = w.sum()
    cum_w = np.cumsum(w)
    cum_m = np.cumsum(w * centers)
    # between-class variance for a split after bin k
    w0 = cum_w[:-1]
    w1 = total - w0
    valid = (w0 > 0) & (w1 > 0)
    m0 = np.where(valid, cum_m[:-1] / np.where(w0 > 0, w0, 1), 0.0)
    m1 = np.where(valid, (cum_m[-1] - cum_m[:-1]) / np.where(w1 > 0, w1, 1), 0.0)
    between = np.where(valid, w0 * w1 * (m0 - m1) ** 2, -np.inf)
    if not np.isfinite(between).any():
        raise DegenerateHistogram("all mass in a single histogram bin")
    k = int(np.argmax(between))
    return float(centers[k])
