"""Exception and warning types shared across the package."""

from __future__ import annotations


class GcopsError(Exception):
    """Base class for all errors raised by this package."""


class EmptyRegion(GcopsError):
    """The observation region contains no sites."""


class RegionMismatch(GcopsError):
    """The two channels were observed on different regions."""


class DegenerateChannel(GcopsError):
    """A channel is all-foreground or all-background within the region."""


class LagTooLarge(GcopsError):
    """A requested lag or truncation radius exceeds what is available."""


class ZeroVariance(GcopsError):
    """An autocovariance field has no variance at lag zero."""


class NonPositiveVariance(GcopsError):
    """The estimated variance normalizer S_hat is not positive.

    The statistic is undefined in that case; small samples with strongly
    signed covariance products can produce it. Carries delta and both
    lag-zero covariances for diagnosis.
    """

    def __init__(self, s_hat: float, delta: float, c0_1: float, c0_2: float):
        self.s_hat = s_hat
        self.delta = delta
        self.c0_1 = c0_1
        self.c0_2 = c0_2
        super().__init__(
            f"variance estimate S_hat={s_hat:.6g} is not positive "
            f"(delta={delta:.6g}, c0_1={c0_1:.6g}, c0_2={c0_2:.6g})"
        )


class DomainError(GcopsError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class EmbeddingFailure(GcopsError):
    """Circulant embedding produced a spectrum with too much negative mass."""


class WindowLargerThanImage(GcopsError):
    """A scan window does not fit inside the image."""


class LengthMismatch(GcopsError):
    """Two frame sequences have different lengths."""


class NoScores(GcopsError):
    """Smoothing was requested but every window was skipped."""


class TooFewBlocks(GcopsError):
    """The permutation tiling yields too few blocks to shuffle."""


class DegenerateHistogram(GcopsError):
    """Automatic thresholding needs at least two distinct intensity levels."""


class EmptyForeground(UserWarning):
    """Segmentation produced an empty mask; the downstream test will reject it."""


class EmptyBackground(UserWarning):
    """Segmentation produced an all-foreground mask within the region."""
