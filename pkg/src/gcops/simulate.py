"""Synthetic generators with analytically known calibration.

Two generators are provided. Gaussian level sets threshold correlated
stationary Gaussian random fields, so channel coverage and the binary
inter-channel correlation are known in closed form (up to an orthant
integral). The spot generator renders Gaussian-profile particles with a
controllable fraction of second-channel particles forced near first-channel
ones, plus optional noise and channel shift.

Gaussian fields use circulant embedding: the covariance is wrapped onto a
padded torus, its FFT gives the embedding spectrum, and one complex-noise
FFT yields two independent real fields with the exact target covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as _fft
from scipy import integrate
from scipy.optimize import brentq
from scipy.special import ndtr

from .covariance import fft_workers
from .errors import DomainError, EmbeddingFailure
from .fields import BinaryField

EMBED_NEG_TOL = 1e-8
PAD_ALPHAS = 6.0


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_rngs(seed, count: int) -> list[np.random.Generator]:
    """Independent generators for batch replicates, split from one seed."""
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in seq.spawn(count)]


@lru_cache(maxsize=4)
def _embedding_spectrum(
    shape: tuple[int, ...], alpha: float, pad_alphas: float
) -> tuple[tuple[int, ...], np.ndarray]:
    """Padded torus shape and sqrt of the embedding spectrum, unit variance."""
    padded = tuple(
        _fft.next_fast_len(int(math.ceil(n + pad_alphas * alpha))) for n in shape
    )
    r2 = np.zeros(padded)
    for ax, m in enumerate(padded):
        k = np.arange(m, dtype=np.float64)
        d = np.minimum(k, m - k)  # torus distance along this axis
        sh = [1] * len(padded)
        sh[ax] = m
        r2 = r2 + (d**2).reshape(sh)
    cov = np.exp(-r2 / alpha**2)
    lam = _fft.fftn(cov, workers=fft_workers()).real
    neg = lam[lam < 0]
    rel_neg = float(-neg.sum() / lam.sum()) if neg.size else 0.0
    if rel_neg > EMBED_NEG_TOL:
        raise EmbeddingFailure(
            f"negative spectral mass {rel_neg:.3g} at padding {pad_alphas:g} alphas"
        )
    np.clip(lam, 0.0, None, out=lam)
    sq = np.sqrt(lam)
    sq.setflags(write=False)
    return padded, sq


def _spectrum_with_retry(shape, alpha):
    last = None
    for pad in (PAD_ALPHAS, 2 * PAD_ALPHAS, 4 * PAD_ALPHAS):
        try:
            return _embedding_spectrum(shape, float(alpha), pad)
        except EmbeddingFailure as exc:
            last = exc
    raise EmbeddingFailure(
        f"embedding failed for shape {shape}, alpha {alpha}: {last}"
    )


def _sample_unit_pair(
    shape: tuple[int, ...], alpha: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Two independent unit-variance fields from one complex-noise FFT.

    With iid complex normal noise zeta (no Hermitian symmetry), the inverse
    FFT of sqrt(lambda) * sqrt(M) * zeta is a complex field whose real and
    imaginary parts are independent, each with the target covariance.
    """
    padded, sq = _spectrum_with_retry(shape, alpha)
    zeta = rng.standard_normal(padded) + 1j * rng.standard_normal(padded)
    scale = math.sqrt(math.prod(padded))
    y = _fft.ifftn(sq * zeta, workers=fft_workers())
    y *= scale
    sl = tuple(slice(0, n) for n in shape)
    return np.ascontiguousarray(y.real[sl]), np.ascontiguousarray(y.imag[sl])


def sample_grf(shape: tuple[int, ...], sigma: float, alpha: float, seed=None) -> np.ndarray:
    """Stationary Gaussian field with squared-exponential covariance.

    The covariance is sigma^2 * exp(-r^2 / alpha^2) at Euclidean distance r.
    The embedding grid is padded to at least shape + 6*alpha per axis, so the
    target covariance holds to truncation error; if the spectrum still has
    negative mass beyond 1e-8 relative, the padding is enlarged before
    giving up.

    Parameters
    ----------
    shape : tuple of int
    sigma : float
        Marginal standard deviation.
    alpha : float
        Correlation length in pixels; the correlation at distance alpha
        is e^-1.
    seed : int, Generator, optional

    Returns
    -------
    ndarray of float64
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    rng = _as_rng(seed)
    field, _ = _sample_unit_pair(tuple(shape), alpha, rng)
    return sigma * field


@dataclass(frozen=True)
class LevelSetParams:
    """Parameters of the correlated Gaussian level-set generator.

    Channels are built from three independent fields X, Y, eps as
    U = X + eps and V = Y + eps; the shared component's variance
    sigma_eps^2 = (rho0 / (1 - rho0)) * sigma0^2 makes corr(U, V) = rho0
    with common variance sigma^2 = sigma0^2 / (1 - rho0). Foregrounds are
    the excursion sets U > tau1 * sigma and V > tau2 * sigma, so coverage
    is 1 - Phi(tau_i) exactly.
    """

    shape: tuple[int, ...]
    alpha_x: float = 8.0
    alpha_y: float | None = None
    alpha_eps: float | None = None
    sigma0: float = 1.0
    rho0: float = 0.0
    tau1: float = 1.0
    tau2: float | None = None
    seed: object = None

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        if len(self.shape) not in (2, 3):
            raise ValueError("shape must be 2D or 3D")
        if self.alpha_y is None:
            object.__setattr__(self, "alpha_y", self.alpha_x)
        if self.alpha_eps is None:
            object.__setattr__(self, "alpha_eps", self.alpha_y)
        if self.tau2 is None:
            object.__setattr__(self, "tau2", self.tau1)
        if not 0.0 <= self.rho0 < 1.0:
            raise ValueError("rho0 must lie in [0, 1)")
        if min(self.alpha_x, self.alpha_y, self.alpha_eps) <= 0:
            raise ValueError("alphas must be positive")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")


def simulate_level_sets(
    params: LevelSetParams,
) -> tuple[BinaryField, BinaryField, dict]:
    """Draw one correlated level-set pair with its analytic calibration.

    Returns
    -------
    (BinaryField, BinaryField, dict)
        The two channels on the full rectangle and the analytic summary
        ``{"p1", "p2", "rho"}``: coverages 1 - Phi(tau_i) and the binary
        inter-channel correlation implied by rho0 and the thresholds.
    """
    rng = _as_rng(params.seed)
    sigma0 = params.sigma0
    sigma = sigma0 / math.sqrt(1.0 - params.rho0)
    sigma_eps = sigma0 * math.sqrt(params.rho0 / (1.0 - params.rho0))

    if params.alpha_x == params.alpha_y:
        x, y = _sample_unit_pair(params.shape, params.alpha_x, rng)
        x = sigma0 * x
        y = sigma0 * y
        if sigma_eps > 0:
            eps = sigma_eps * _sample_unit_pair(params.shape, params.alpha_eps, rng)[0]
        else:
            eps = 0.0
    else:
        x = sigma0 * _sample_unit_pair(params.shape, params.alpha_x, rng)[0]
        if sigma_eps > 0 and params.alpha_y == params.alpha_eps:
            # Y and eps share one complex draw when their scales agree
            y, eps = _sample_unit_pair(params.shape, params.alpha_y, rng)
            y = sigma0 * y
            eps = sigma_eps * eps
        else:
            y = sigma0 * _sample_unit_pair(params.shape, params.alpha_y, rng)[0]
            if sigma_eps > 0:
                eps = sigma_eps * _sample_unit_pair(params.shape, params.alpha_eps, rng)[0]
            else:
                eps = 0.0

    u = x + eps
    v = y + eps
    a = BinaryField.from_mask(u > params.tau1 * sigma)
    b = BinaryField.from_mask(v > params.tau2 * sigma)
    analytic = {
        "p1": float(ndtr(-params.tau1)),
        "p2": float(ndtr(-params.tau2)),
        "rho": binary_correlation(params.rho0, params.tau1, params.tau2),
    }
    return a, b, analytic


def binary_correlation(rho0: float, tau1: float, tau2: float) -> float:
    """Correlation of the two thresholded indicators.

    For standardized jointly normal (Z1, Z2) with correlation ``rho0``,
    computes (P(Z1 > tau1, Z2 > tau2) - p1 p2) / sqrt(p1 q1 p2 q2) where
    p_i = 1 - Phi(tau_i). The orthant probability is reduced to a 1D
    integral and evaluated by adaptive quadrature (absolute accuracy well
    under 1e-8).
    """
    if not -1.0 < rho0 < 1.0:
        raise DomainError(f"rho0 {rho0!r} outside (-1, 1)")
    if rho0 == 0.0:
        return 0.0
    p1 = float(ndtr(-tau1))
    p2 = float(ndtr(-tau2))
    s = math.sqrt(1.0 - rho0 * rho0)
    inv_sqrt2pi = 1.0 / math.sqrt(2.0 * math.pi)

    def integrand(u: float) -> float:
        return inv_sqrt2pi * math.exp(-0.5 * u * u) * float(
            ndtr(-(tau2 - rho0 * u) / s)
        )

    orthant, _err = integrate.quad(
        integrand, tau1, np.inf, epsabs=1e-10, epsrel=1e-10, limit=200
    )
    denom = math.sqrt(p1 * (1.0 - p1) * p2 * (1.0 - p2))
    return float((orthant - p1 * p2) / denom)


def rho0_for_binary_correlation(rho: float, tau1: float, tau2: float) -> float:
    """Invert :func:`binary_correlation` in its first argument.

    Useful to target a prescribed binary correlation with mismatched
    thresholds, where the relation has no closed form.
    """
    if rho == 0.0:
        return 0.0
    if not -1.0 < rho < 1.0:
        raise DomainError(f"target correlation {rho!r} outside (-1, 1)")
    lo, hi = (0.0, 1.0 - 1e-9) if rho > 0 else (-1.0 + 1e-9, 0.0)

    def gap(r0: float) -> float:
        return binary_correlation(r0, tau1, tau2) - rho

    try:
        return float(brentq(gap, lo, hi, xtol=1e-10))
    except ValueError as exc:
        raise DomainError(
            f"no rho0 in (-1, 1) achieves binary correlation {rho}"
        ) from exc


@dataclass(frozen=True)
class SpotParams:
    """Parameters of the particle-pair generator.

    ``forced_fraction`` of the second-channel (green) particles is planted
    uniformly within ``neighbor_distance`` of distinct first-channel (red)
    particles; the rest are uniform. Each particle is rendered as an
    isotropic Gaussian of standard deviation ``spot_radius`` and unit peak.
    ``shift`` displaces the green channel (array-axis order) with border
    truncation; ``noise_sd`` adds white Gaussian noise to both images, in
    units of the unit peak.
    """

    shape: tuple[int, ...] = (256, 256)
    n_red: int = 100
    n_green: int = 100
    forced_fraction: float = 0.0
    neighbor_distance: float = 1.0
    spot_radius: float = 2.0
    noise_sd: float = 0.0
    shift: tuple[float, ...] | None = None
    seed: object = None

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        if len(self.shape) not in (2, 3):
            raise ValueError("shape must be 2D or 3D")
        if self.n_red < 0 or self.n_green < 0:
            raise ValueError("particle counts must be non-negative")
        if not 0.0 <= self.forced_fraction <= 1.0:
            raise ValueError("forced_fraction must lie in [0, 1]")
        k = int(round(self.forced_fraction * self.n_green))
        if k > self.n_red:
            raise ValueError(
                f"{k} forced green particles need as many distinct red ones"
            )
        if self.spot_radius <= 0:
            raise ValueError("spot_radius must be positive")
        if self.shift is not None:
            shift = tuple(float(s) for s in self.shift)
            if len(shift) != len(self.shape):
                raise ValueError("shift dimensionality mismatch")
            object.__setattr__(self, "shift", shift)


@dataclass(frozen=True)
class SpotSample:
    """One draw of the spot generator: raw images and ground-truth masks."""

    red_image: np.ndarray
    green_image: np.ndarray
    red_truth: BinaryField
    green_truth: BinaryField


def _render_spots(
    centers: np.ndarray, shape: tuple[int, ...], sd: float
) -> np.ndarray:
    """Sum of unit-peak Gaussians at the given (possibly off-grid) centers."""
    img = np.zeros(shape, dtype=np.float64)
    if centers.size == 0:
        return img
    rad = int(math.ceil(4.0 * sd))
    two_sd2 = 2.0 * sd * sd
    for center in centers:
        axes = []
        oob = False
        for c, n in zip(center, shape):
            lo = max(int(math.floor(c)) - rad, 0)
            hi = min(int(math.floor(c)) + rad + 1, n)
            if hi <= lo:
                oob = True
                break
            axes.append(np.arange(lo, hi))
        if oob:
            continue
        d2 = np.zeros(tuple(ax.size for ax in axes))
        for i, (ax, c) in enumerate(zip(axes, center)):
            sh = [1] * len(axes)
            sh[i] = ax.size
            d2 = d2 + ((ax - c) ** 2).reshape(sh)
        img[np.ix_(*axes)] += np.exp(-d2 / two_sd2)
    return img


def _uniform_centers(rng, count: int, shape: tuple[int, ...]) -> np.ndarray:
    cols = [rng.uniform(0.0, n, count) for n in shape]
    return np.column_stack(cols) if count else np.empty((0, len(shape)))


def _ball_offsets(rng, count: int, radius: float, dims: int) -> np.ndarray:
    """Uniform draws from the ball of the given radius."""
    if count == 0:
        return np.empty((0, dims))
    direction = rng.standard_normal((count, dims))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.uniform(0.0, 1.0, count) ** (1.0 / dims)
    return direction * r[:, None]


def simulate_spots(params: SpotParams) -> SpotSample:
    """Draw one spot-image pair with ground truth.

    Red centers are uniform on the image. A ``forced_fraction`` of green
    centers is placed within ``neighbor_distance`` of distinct random red
    centers, the remainder uniform. Ground-truth masks threshold the
    noiseless rendered images at half the single-spot peak, so they are
    unaffected by ``noise_sd`` but do reflect ``shift``.
    """
    rng = _as_rng(params.seed)
    shape = params.shape
    dims = len(shape)

    red_centers = _uniform_centers(rng, params.n_red, shape)
    k = int(round(params.forced_fraction * params.n_green))
    if k > 0:
        anchors = red_centers[rng.choice(params.n_red, size=k, replace=False)]
        forced = anchors + _ball_offsets(rng, k, params.neighbor_distance, dims)
    else:
        forced = np.empty((0, dims))
    free = _uniform_centers(rng, params.n_green - k, shape)
    green_centers = np.vstack([forced, free])

    if params.shift is not None:
        green_centers = green_centers + np.asarray(params.shift)

    red = _render_spots(red_centers, shape, params.spot_radius)
    green = _render_spots(green_centers, shape, params.spot_radius)
    red_truth = BinaryField.from_mask(red > 0.5)
    green_truth = BinaryField.from_mask(green > 0.5)

    if params.noise_sd > 0:
        red = red + rng.normal(0.0, params.noise_sd, shape)
        green = green + rng.normal(0.0, params.noise_sd, shape)
    return SpotSample(
        red_image=red,
        green_image=green,
        red_truth=red_truth,
        green_truth=green_truth,
    )
