"""Binary fields on a regular lattice and the elementary coverage estimators.

A channel is observed as a boolean foreground mask together with a boolean
observation region of the same shape. All estimators are written against the
region mask, so regions need not be rectangular.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChannel, EmptyRegion, RegionMismatch


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=bool)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class BinaryField:
    """A binary image restricted to an observation region.

    Parameters
    ----------
    mask : ndarray of bool
        Foreground indicator, one value per lattice site.
    region : ndarray of bool
        Observation-region indicator, same shape as ``mask``. Sites outside
        the region are never foreground; this is enforced at construction.
    """

    mask: np.ndarray
    region: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask)
        region = np.asarray(self.region)
        if mask.shape != region.shape:
            raise RegionMismatch(
                f"mask shape {mask.shape} != region shape {region.shape}"
            )
        if mask.ndim not in (2, 3):
            raise ValueError(f"expected a 2D or 3D field, got {mask.ndim}D")
        mask = mask.astype(bool)
        region = region.astype(bool)
        if not region.any():
            raise EmptyRegion("observation region is empty")
        if (mask & ~region).any():
            raise ValueError("mask has foreground outside the region")
        object.__setattr__(self, "mask", _freeze(mask))
        object.__setattr__(self, "region", _freeze(region))

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "BinaryField":
        """Wrap a plain mask, observing it on the full rectangle."""
        mask = np.asarray(mask, dtype=bool)
        return cls(mask, np.ones(mask.shape, dtype=bool))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mask.shape

    @property
    def dims(self) -> int:
        return self.mask.ndim

    @property
    def n(self) -> int:
        """Number of observed sites."""
        return int(self.region.sum())

    @property
    def full_region(self) -> bool:
        """True when the region is the entire rectangle."""
        return bool(self.region.all())

    def crop(self, origin: tuple[int, ...], size: tuple[int, ...]) -> "BinaryField":
        """Sub-field on the axis-aligned window at ``origin`` of ``size``."""
        if len(origin) != self.dims or len(size) != self.dims:
            raise ValueError("origin/size dimensionality mismatch")
        sl = tuple(slice(o, o + s) for o, s in zip(origin, size))
        return BinaryField(self.mask[sl], self.region[sl])

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryField):
            return NotImplemented
        return np.array_equal(self.mask, other.mask) and np.array_equal(
            self.region, other.region
        )


@dataclass(frozen=True)
class CoverageStats:
    """Coverage proportions of a channel pair and their departure product.

    ``d_hat = p12_hat - p1_hat * p2_hat`` measures the departure from
    independence of the two foregrounds over the common region of n sites.
    """

    p1_hat: float
    p2_hat: float
    p12_hat: float
    d_hat: float
    n: int


def coverage(field: BinaryField) -> float:
    """Fraction of region sites that are foreground."""
    n = field.n
    if n == 0:
        raise EmptyRegion("observation region is empty")
    return float(np.count_nonzero(field.mask) / n)


def empirical_d(a: BinaryField, b: BinaryField) -> CoverageStats:
    """Coverage statistics of a channel pair over their common region.

    Parameters
    ----------
    a, b : BinaryField
        The two channels. They must share the observation region.

    Returns
    -------
    CoverageStats

    Raises
    ------
    RegionMismatch
        If the regions differ.
    DegenerateChannel
        If either channel is all-foreground or all-background within the
        region; the variance normalizer would vanish there.
    """
    if a.shape != b.shape or not np.array_equal(a.region, b.region):
        raise RegionMismatch("channels were observed on different regions")
    n = a.n
    n1 = int(np.count_nonzero(a.mask))
    n2 = int(np.count_nonzero(b.mask))
    for label, k in (("first", n1), ("second", n2)):
        if k == 0 or k == n:
            raise DegenerateChannel(
                f"{label} channel is {'all-background' if k == 0 else 'all-foreground'}"
                " within the region"
            )
    n12 = int(np.count_nonzero(a.mask & b.mask))
    p1, p2, p12 = n1 / n, n2 / n, n12 / n
    return CoverageStats(p1_hat=p1, p2_hat=p2, p12_hat=p12, d_hat=p12 - p1 * p2, n=n)
