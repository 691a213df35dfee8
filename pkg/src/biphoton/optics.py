"""Core biphoton optics: experiment parameters, beam widths, and the joint
position/momentum statistics of a double-Gaussian two-photon state.

The transverse state at the crystal is modeled as a product of two Gaussians,
one in the pair centroid (width ``w0``, the pump waist) and one in the pair
separation (width ``sigma0``, set by the crystal length). Free-space
propagation keeps the product form and simply rescales both widths, so every
quantity in this module reduces to closed-form expressions in ``w(z)`` and
``sigma(z)``.

Momentum uncertainties are expressed in units of hbar per metre, i.e. the
returned value is the standard deviation of the transverse wavevector
component of one photon conditioned on its partner.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GridError, ParameterDomainError

__all__ = [
    "ExperimentParams",
    "BeamWidths",
    "JointDistribution2D",
    "UncertaintyEstimate",
    "ScalingRegime",
    "derive_params",
    "beam_widths",
    "default_position_grid",
    "joint_position_pd",
    "conditional_position_sigma",
    "position_scaling_regime",
    "conditional_momentum_sigma",
    "momentum_sigma_from_fourier_plane",
]


@dataclass(frozen=True)
class ExperimentParams:
    """Pump and crystal constants, all in SI metres.

    Attributes
    ----------
    w0 : float
        Pump beam waist at the crystal.
    L : float
        Crystal length.
    lambda_p : float
        Pump wavelength.
    k : float
        Wavenumber of each down-converted photon, ``pi / lambda_p``.
    sigma0 : float
        Width of the pair-separation Gaussian at the crystal,
        ``sqrt(0.455 * L * lambda_p / (2 pi))``.
    """

    w0: float
    L: float
    lambda_p: float
    k: float
    sigma0: float


@dataclass(frozen=True)
class BeamWidths:
    """Sum- and difference-coordinate widths at a propagation distance z."""

    w_z: float
    sigma_z: float
    z: float


@dataclass
class JointDistribution2D:
    """Joint probability density sampled on a rectangular grid.

    axis1 indexes the first (row) coordinate of ``values``, axis2 the
    second. ``scale`` records the normalization convention; distributions
    produced here are max-normalized ("max"), meaning the largest sample
    equals 1.
    """

    axis1: np.ndarray
    axis2: np.ndarray
    values: np.ndarray
    scale: str = "max"


@dataclass
class UncertaintyEstimate:
    """A conditional standard deviation with provenance.

    ``method`` is one of "analytic", "quadrature", or "fitted".
    ``diagnostics`` is populated only for fitted estimates (residual norm,
    parameter covariance). ``saturated`` marks angular widths pinned at the
    uniform-distribution limit.
    """

    value: float
    method: str
    z: Optional[float] = None
    diagnostics: Optional[dict] = None
    saturated: bool = False


@dataclass(frozen=True)
class ScalingRegime:
    """Which single-width approximation describes the conditional position
    uncertainty at a given plane."""

    regime: str  # "near", "far", or "crossover"
    value: float
    z: float


def derive_params(w0: float, L: float, lambda_p: float) -> ExperimentParams:
    """Build ExperimentParams from the three measured constants.

    Parameters
    ----------
    w0 : float
        Pump waist in metres.
    L : float
        Crystal length in metres.
    lambda_p : float
        Pump wavelength in metres.

    Raises
    ------
    ParameterDomainError
        If any input is not strictly positive.

    Notes
    -----
    The closed forms assume the pump waist is much larger than the birth
    zone. A warning (not an error) is emitted when ``w0 < 10 * sigma0``.
    """
    if not (w0 > 0 and L > 0 and lambda_p > 0):
        raise ParameterDomainError(
            "w0, L and lambda_p must all be > 0 "
            f"(got w0={w0!r}, L={L!r}, lambda_p={lambda_p!r})"
        )
    k = math.pi / lambda_p
    sigma0 = math.sqrt(0.455 * L * lambda_p / (2.0 * math.pi))
    if w0 < 10.0 * sigma0:
        warnings.warn(
            f"pump waist w0={w0:g} m is within 10x of sigma0={sigma0:g} m; "
            "the wide-pump approximation degrades in this regime",
            stacklevel=2,
        )
    return ExperimentParams(w0=w0, L=L, lambda_p=lambda_p, k=k, sigma0=sigma0)


def beam_widths(params: ExperimentParams, z: float) -> BeamWidths:
    """Propagated sum and difference widths at distance z from the crystal.

    Both follow the usual Gaussian-beam hyperbola: ``s(z) = s0 * sqrt(1 +
    z^2 / (k^2 s0^4))``.
    """
    if z < 0:
        raise ParameterDomainError(f"z must be >= 0, got {z!r}")
    k = params.k
    w_z = params.w0 * math.sqrt(1.0 + z**2 / (k**2 * params.w0**4))
    sigma_z = params.sigma0 * math.sqrt(1.0 + z**2 / (k**2 * params.sigma0**4))
    return BeamWidths(w_z=w_z, sigma_z=sigma_z, z=z)


def default_position_grid(
    params: ExperimentParams, z: float, n: int = 512, half_span_widths: float = 4.0
) -> np.ndarray:
    """Uniform symmetric grid wide enough to hold the joint distribution.

    Spans ``+- half_span_widths * max(w(z), sigma(z))`` with n points.
    """
    bw = beam_widths(params, z)
    half = half_span_widths * max(bw.w_z, bw.sigma_z)
    return np.linspace(-half, half, n)


def _check_grid(grid: np.ndarray, min_half_span: float) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 8:
        raise GridError("grid must be a 1-D array with at least 8 points")
    steps = np.diff(grid)
    if not np.all(steps > 0):
        raise GridError("grid must be strictly increasing")
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise GridError("grid must be uniform")
    if grid[0] > -min_half_span or grid[-1] < min_half_span:
        raise GridError(
            "grid truncates the distribution: span must cover at least "
            f"+-{min_half_span:g} m, got [{grid[0]:g}, {grid[-1]:g}]"
        )
    return grid


def joint_position_pd(
    params: ExperimentParams, z: float, grid: Optional[np.ndarray] = None
) -> JointDistribution2D:
    """Joint probability density P(y_s, y_i; z) on a common transverse grid.

    The density is the 1-D transverse cut of the double Gaussian,

        P ~ exp(-(y_s + y_i)^2 / (2 w(z)^2)) * exp(-(y_s - y_i)^2 / (2 sigma(z)^2)),

    max-normalized. The x coordinates integrate out analytically and only
    rescale the overall constant, so they never appear here.

    Parameters
    ----------
    grid : array_like, optional
        Sample positions in metres used for both axes. Must be uniform,
        strictly increasing, and span at least +-3 max(w(z), sigma(z));
        defaults to 512 points over +-4 times that width.

    Raises
    ------
    GridError
        If the supplied grid is malformed or truncates the state.
    """
    bw = beam_widths(params, z)
    wide = max(bw.w_z, bw.sigma_z)
    if grid is None:
        grid = default_position_grid(params, z)
    grid = _check_grid(grid, 3.0 * wide)

    ys = grid[:, None]
    yi = grid[None, :]
    expo = -((ys + yi) ** 2) / (2.0 * bw.w_z**2) - ((ys - yi) ** 2) / (
        2.0 * bw.sigma_z**2
    )
    values = np.exp(expo)
    values /= values.max()
    return JointDistribution2D(axis1=grid.copy(), axis2=grid.copy(), values=values)


def conditional_position_sigma(params: ExperimentParams, z: float) -> UncertaintyEstimate:
    """Standard deviation of y_s at fixed y_i (a slice through the joint PD).

    For the double Gaussian the conditional slice is itself Gaussian with

        Delta(z) = w(z) sigma(z) / sqrt(w(z)^2 + sigma(z)^2),

    independent of which y_i is held fixed. Grows monotonically with z,
    tracking sigma(z) while the pump width dominates and w(z) far away.
    """
    bw = beam_widths(params, z)
    value = bw.w_z * bw.sigma_z / math.hypot(bw.w_z, bw.sigma_z)
    return UncertaintyEstimate(value=value, method="analytic", z=z)


def position_scaling_regime(params: ExperimentParams, z: float) -> ScalingRegime:
    """Classify which width controls the conditional position uncertainty.

    Returns the "near" regime (value ~ sigma(z)) while w(z) >> sigma(z),
    the "far" regime (value ~ w(z)) once sigma(z) >> w(z), and flags the
    plane as "crossover" when the two widths are within a factor of two of
    each other. In the crossover the reported value is the exact
    conditional width, since neither one-width law applies.
    """
    bw = beam_widths(params, z)
    ratio = bw.w_z / bw.sigma_z
    if ratio >= 2.0:
        return ScalingRegime(regime="near", value=bw.sigma_z, z=z)
    if ratio <= 0.5:
        return ScalingRegime(regime="far", value=bw.w_z, z=z)
    exact = bw.w_z * bw.sigma_z / math.hypot(bw.w_z, bw.sigma_z)
    return ScalingRegime(regime="crossover", value=exact, z=z)


def conditional_momentum_sigma(params: ExperimentParams) -> UncertaintyEstimate:
    """Conditional transverse momentum spread, in units of hbar per metre.

    The momentum-space state is again a double Gaussian whose conditional
    width is 1/sqrt(w0^2 + sigma0^2). Free-space propagation only adds a
    phase in momentum space, so the value carries no z dependence; the
    estimate is returned with ``z=None``.
    """
    value = 1.0 / math.hypot(params.w0, params.sigma0)
    return UncertaintyEstimate(value=value, method="analytic", z=None)


def momentum_sigma_from_fourier_plane(
    camera_sigma: float, f: float, params: ExperimentParams
) -> UncertaintyEstimate:
    """Convert a position spread measured in the focal plane of a lens into
    a transverse momentum spread.

    A thin lens of focal length f maps wavevector q to focal-plane position
    x = q f / k, so ``sigma_p = camera_sigma * k / f`` in hbar per metre.
    """
    if f <= 0:
        raise ParameterDomainError(f"focal length must be > 0, got {f!r}")
    if camera_sigma < 0:
        raise ParameterDomainError(f"camera_sigma must be >= 0, got {camera_sigma!r}")
    value = camera_sigma * params.k / f
    return UncertaintyEstimate(value=value, method="analytic", z=None)
