"""Local analysis: window scans, kernel-smoothed score maps, time shifts.

A scan runs the independence test inside many small windows (grid-placed or
randomly located) and records one score per window. Smoothing turns window
scores into a dense field by Nadaraya-Watson averaging with a Gaussian
kernel. A shift scan slides two frame sequences against each other and
reports the per-shift score distribution.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .covariance import fft_workers
from .errors import (
    DegenerateChannel,
    EmptyRegion,
    LengthMismatch,
    NonPositiveVariance,
    NoScores,
    WindowLargerThanImage,
)
from .fields import BinaryField
from .testing import TestReport, gcops_test

DEFAULT_STRIDE = 25
DEFAULT_BANDWIDTH = 5.0
DEFAULT_LEVEL = 0.05

# Exceptions that mark a window as skipped rather than failing the scan.
_SKIP_ERRORS = (DegenerateChannel, EmptyRegion, NonPositiveVariance)


def default_window_size(dims: int) -> tuple[int, ...]:
    """50x50 windows in 2D; 10 pages of 50x50 in 3D (array axis order)."""
    return (50, 50) if dims == 2 else (10, 50, 50)


@dataclass(frozen=True)
class WindowSpec:
    """Window geometry and placement for a scan.

    Parameters
    ----------
    size : tuple of int
        Window extents in array axis order.
    stride : int
        Grid step in pixels, identical on every axis.
    placement : str
        ``"grid"`` walks every stride-reachable position whose window fits
        entirely inside the image; ``"random"`` draws ``count`` windows
        uniformly over the valid origins (partial windows never occur by
        construction).
    count, seed :
        Random placement only.
    """

    size: tuple[int, ...]
    stride: int = DEFAULT_STRIDE
    placement: str = "grid"
    count: int | None = None
    seed: object = None

    def __post_init__(self):
        object.__setattr__(self, "size", tuple(int(s) for s in self.size))
        if any(s < 1 for s in self.size):
            raise ValueError("window extents must be positive")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")
        if self.placement not in ("grid", "random"):
            raise ValueError(f"unknown placement {self.placement!r}")
        if self.placement == "random" and (self.count is None or self.count < 1):
            raise ValueError("random placement needs a positive count")


@dataclass(frozen=True)
class WindowResult:
    """Outcome for one window: a report, or the reason it was skipped."""

    origin: tuple[int, ...]
    center: tuple[float, ...]
    report: TestReport | None = None
    skip_reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.report is not None


@dataclass
class ScanResult:
    """All window outcomes of one scan."""

    shape: tuple[int, ...]
    level: float
    entries: tuple[WindowResult, ...]
    smoothed: np.ndarray | None = None

    @property
    def hits(self) -> tuple[tuple[float, ...], ...]:
        """Centers whose unilateral colocalization p-value beats the level."""
        return tuple(
            e.center for e in self.entries if e.ok and e.report.p_coloc < self.level
        )

    @property
    def completed(self) -> tuple[WindowResult, ...]:
        return tuple(e for e in self.entries if e.ok)

    @property
    def skipped(self) -> tuple[WindowResult, ...]:
        return tuple(e for e in self.entries if not e.ok)


def _origins(shape: tuple[int, ...], spec: WindowSpec) -> list[tuple[int, ...]]:
    if any(s > n for s, n in zip(spec.size, shape)):
        raise WindowLargerThanImage(
            f"window {spec.size} does not fit in image {shape}"
        )
    if spec.placement == "grid":
        ranges = [
            range(0, n - s + 1, spec.stride) for n, s in zip(shape, spec.size)
        ]
        return list(itertools.product(*ranges))
    rng = np.random.default_rng(spec.seed)
    highs = [n - s + 1 for n, s in zip(shape, spec.size)]
    draws = [rng.integers(0, h, spec.count) for h in highs]
    return [tuple(int(d[i]) for d in draws) for i in range(spec.count)]


def scan(
    a: BinaryField,
    b: BinaryField,
    spec: WindowSpec | None = None,
    level: float = DEFAULT_LEVEL,
    **test_options,
) -> ScanResult:
    """Run the independence test in every window of a placement.

    Windows whose content is degenerate (either channel empty or full, or an
    empty region, or a non-positive variance estimate) are recorded as
    skipped with the exception name as reason; they are expected on sparse
    images and do not fail the scan.

    Parameters
    ----------
    a, b : BinaryField
        Channels on a common region.
    spec : WindowSpec, optional
        Defaults to grid placement with 50x50 (2D) or 10x50x50 (3D) windows
        and stride 25.
    level : float
        Unilateral level defining hits.
    **test_options
        Forwarded to :func:`gcops.testing.gcops_test`.
    """
    if spec is None:
        spec = WindowSpec(size=default_window_size(a.dims))
    origins = _origins(a.shape, spec)

    def run(origin: tuple[int, ...]) -> WindowResult:
        center = tuple(o + (s - 1) / 2.0 for o, s in zip(origin, spec.size))
        try:
            report = gcops_test(
                a.crop(origin, spec.size), b.crop(origin, spec.size), **test_options
            )
            return WindowResult(origin=origin, center=center, report=report)
        except _SKIP_ERRORS as exc:
            return WindowResult(
                origin=origin, center=center, skip_reason=type(exc).__name__
            )

    workers = fft_workers()
    if workers > 1 and len(origins) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = tuple(pool.map(run, origins))
    else:
        entries = tuple(run(o) for o in origins)
    return ScanResult(shape=a.shape, level=level, entries=entries)


def smooth_scores(
    result: ScanResult, bandwidth: float = DEFAULT_BANDWIDTH
) -> np.ndarray:
    """Dense score field: Gaussian-kernel weighted average of window scores.

    Every image site receives the Nadaraya-Watson average of the completed
    windows' statistics, weighted by a Gaussian kernel of the given
    bandwidth (in pixels) on the distance to each window center. Skipped
    windows contribute nothing. The result is stored on ``result.smoothed``
    and returned; values always lie within the range of contributing scores.

    Raises
    ------
    NoScores
        If every window was skipped.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    done = result.completed
    if not done:
        raise NoScores("no completed windows to smooth")
    centers = np.array([e.center for e in done])  # (K, d)
    scores = np.array([e.report.t for e in done])  # (K,)
    shape = result.shape
    total = int(np.prod(shape))
    out = np.empty(total, dtype=np.float64)
    two_bw2 = 2.0 * bandwidth * bandwidth
    chunk = max(1, 4_000_000 // max(len(done), 1))
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        coords = np.unravel_index(np.arange(start, stop), shape)
        d2 = np.zeros((stop - start, len(done)))
        for ax, coord in enumerate(coords):
            d2 += (coord[:, None] - centers[None, :, ax]) ** 2
        # subtract the per-site minimum so the nearest window always gets
        # weight 1 and distant sites never hit 0/0
        d2 -= d2.min(axis=1, keepdims=True)
        w = np.exp(-d2 / two_bw2)
        out[start:stop] = (w @ scores) / w.sum(axis=1)
    smoothed = out.reshape(shape)
    result.smoothed = smoothed
    return smoothed


@dataclass(frozen=True)
class ShiftCurve:
    """Score distributions of a scan over temporal shifts.

    ``frame_scores[i]`` holds the per-frame statistics at ``shifts[i]``;
    ``means[i]`` is their average (NaN when every frame at that shift was
    skipped). The pairing convention: at shift dt, frame t + dt of the
    reference sequence meets frame t of the second sequence, so a peak at
    negative dt means the second channel shows events later than the
    reference.
    """

    shifts: tuple[int, ...]
    frame_scores: tuple[tuple[float, ...], ...]
    means: tuple[float, ...]
    skipped: tuple[int, ...] = dc_field(default_factory=tuple)

    @property
    def peak_shift(self) -> int:
        means = np.asarray(self.means)
        if np.all(np.isnan(means)):
            raise NoScores("no completed frame tests at any shift")
        return int(self.shifts[int(np.nanargmax(means))])


def shift_scan(
    seq_a: list[BinaryField],
    seq_b: list[BinaryField],
    max_shift: int = 20,
    **test_options,
) -> ShiftCurve:
    """Frame-by-frame tests of two sequences over relative temporal shifts.

    For each shift dt in [-max_shift, max_shift], pairs frame t + dt of
    ``seq_a`` (the reference) with frame t of ``seq_b``, dropping
    out-of-range frames, and collects the per-frame statistics. Degenerate
    frames are skipped and counted, not scored.

    Raises
    ------
    LengthMismatch
        If the sequences have different lengths.
    """
    if len(seq_a) != len(seq_b):
        raise LengthMismatch(
            f"sequence lengths differ: {len(seq_a)} vs {len(seq_b)}"
        )
    length = len(seq_a)
    if length == 0:
        raise LengthMismatch("sequences are empty")
    if not 0 <= max_shift < length:
        raise ValueError("max_shift must lie in [0, sequence length)")

    shifts = tuple(range(-max_shift, max_shift + 1))
    all_scores: list[tuple[float, ...]] = []
    means: list[float] = []
    skipped: list[int] = []
    for dt in shifts:
        scores: list[float] = []
        skip = 0
        for t in range(max(0, -dt), min(length, length - dt)):
            try:
                report = gcops_test(seq_a[t + dt], seq_b[t], **test_options)
                scores.append(report.t)
            except _SKIP_ERRORS:
                skip += 1
        all_scores.append(tuple(scores))
        means.append(float(np.mean(scores)) if scores else math.nan)
        skipped.append(skip)
    return ShiftCurve(
        shifts=shifts,
        frame_scores=tuple(all_scores),
        means=tuple(means),
        skipped=tuple(skipped),
    )
