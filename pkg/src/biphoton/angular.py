"""Joint angle statistics of the biphoton in polar coordinates.

The position-basis double Gaussian turns, in polar coordinates, into

    P(r_s, th_s, r_i, th_i; z) ~ exp(-C (r_s^2 + r_i^2) - 2 D r_s r_i cos(th_s - th_i))

with C = (1/w^2 + 1/sigma^2)/2 and D = (1/w^2 - 1/sigma^2)/2 evaluated at
the propagated widths. Integrating out both radii (with the polar Jacobian)
gives the joint angle distribution; it depends on the angles only through
th_s - th_i. D is negative while the sum width dominates (angle
correlation, peak at 0) and positive far away (anti-correlation, peak at
pi).

Two width conventions are provided. The quadrature path integrates the
radii numerically and reports a circular standard deviation; it carries
the full kernel, including the birth-zone floor of order sigma0/w0 that
the conditional angle width cannot drop below. The closed-form path
restricts the integrand to equal radii, collapsing the radial integral
to P0 / (C + D cos)^{3/2}, and evaluates the coefficient ratio in the
pump-dominated limit w0 >> sigma0. That limit removes the floor, so the
closed-form width is the curve that actually follows the asymptotic
scaling laws (linear growth well inside the crossing distance, 1/z decay
well outside).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GridError, ParameterDomainError, RefinementError
from .optics import ExperimentParams, UncertaintyEstimate, beam_widths

__all__ = [
    "AngleKernelCoeffs",
    "PolarJointPD",
    "angle_grid",
    "angle_kernel_coeffs",
    "joint_angle_pd_quadrature",
    "joint_angle_pd_closed_form",
    "conditional_angle_slice",
    "conditional_angle_sigma",
    "UNIFORM_CIRCULAR_STDDEV",
]

# Standard deviation of an angle distributed uniformly over a 2*pi interval,
# reported when a half-maximum level is never attained.
UNIFORM_CIRCULAR_STDDEV = 2.0 * math.pi / math.sqrt(12.0)

_HALF_MAX = 2.0 ** (2.0 / 3.0)


@dataclass(frozen=True)
class AngleKernelCoeffs:
    """Coefficients of the polar kernel at one plane.

    P0 is the amplitude of the equal-radius closed form; C and D carry
    units of 1/length^2. C > 0 and C >= |D| always; the sign of D encodes
    the correlation regime.
    """

    P0: float
    C: float
    D: float
    z: float


@dataclass
class PolarJointPD:
    """Joint angle probability density on a uniform circular grid.

    theta_s indexes rows of ``values``, theta_i columns. Both grids cover
    [-pi, pi) and the density is max-normalized. ``method`` records how the
    radial degrees of freedom were handled ("quadrature", "closed-form",
    or "tilt-ensemble").
    """

    theta_s: np.ndarray
    theta_i: np.ndarray
    values: np.ndarray
    method: str


def angle_grid(n_theta: int) -> np.ndarray:
    """Uniform angular grid of n_theta points on [-pi, pi).

    n_theta must be even and at least 64 so the grid contains both -pi and
    0 exactly; peak locations are then exact grid points in either
    correlation regime.
    """
    if n_theta < 64 or n_theta % 2 != 0:
        raise GridError(f"n_theta must be even and >= 64, got {n_theta!r}")
    return -math.pi + np.arange(n_theta) * (2.0 * math.pi / n_theta)


def angle_kernel_coeffs(params: ExperimentParams, z: float) -> AngleKernelCoeffs:
    """Evaluate P0, C, D at distance z."""
    bw = beam_widths(params, z)
    iw2 = 1.0 / bw.w_z**2
    is2 = 1.0 / bw.sigma_z**2
    return AngleKernelCoeffs(
        P0=math.sqrt(math.pi / 2.0) / 8.0,
        C=0.5 * (iw2 + is2),
        D=0.5 * (iw2 - is2),
        z=z,
    )


def joint_angle_pd_closed_form(coeffs: AngleKernelCoeffs, delta_theta):
    """Equal-radius closed form P0 / (C + D cos(delta_theta))^{3/2}.

    Accepts a scalar or array of angle differences. The denominator is
    positive for physical coefficients; a non-positive value (possible
    only for hand-built coefficients) raises a domain error.
    """
    dt = np.asarray(delta_theta, dtype=float)
    den = coeffs.C + coeffs.D * np.cos(dt)
    if np.any(den <= 0.0):
        raise ParameterDomainError(
            "closed-form denominator C + D*cos is not positive everywhere"
        )
    out = coeffs.P0 * den**-1.5
    return float(out) if np.isscalar(delta_theta) else out


def _auto_n_radial(wide: float, narrow: float) -> int:
    # Resolve the narrow Gaussian ridge with ~4 midpoint cells per width
    # across a domain of 5 wide widths.
    n = int(np.clip(20.0 * wide / narrow, 256, 4096))
    return n + (n % 2)


def _angle_profile(C: float, D: float, R: float, n_radial: int, n_theta: int) -> np.ndarray:
    """Radial double integral for each distinct value of cos(delta_theta).

    Composite midpoint rule on [0, R] in both radii. The combined exponent
    -C(r_s^2 + r_i^2) - 2 D cos * r_s r_i is <= 0 whenever |D| <= C and is
    assembled before exponentiation, so nothing overflows. cos is even on
    the circular grid, so only n_theta/2 + 1 values need evaluating; the
    rest mirror.
    """
    h = R / n_radial
    r = (np.arange(n_radial) + 0.5) * h
    damp = C * r * r
    cosines = np.cos(2.0 * math.pi * np.arange(n_theta // 2 + 1) / n_theta)
    half = np.empty(cosines.size)
    chunk = max(1, min(n_radial, 2**21 // n_radial + 1))
    for j, c in enumerate(cosines):
        t = -2.0 * D * c
        acc = 0.0
        for a in range(0, n_radial, chunk):
            expo = t * r[a : a + chunk, None] * r[None, :]
            expo -= damp[a : a + chunk, None]
            expo -= damp[None, :]
            acc += r[a : a + chunk] @ (np.exp(expo) @ r)
        half[j] = acc
    prof = np.empty(n_theta)
    prof[: n_theta // 2 + 1] = half
    prof[n_theta // 2 + 1 :] = half[-2:0:-1]
    return prof * (h * h)


def joint_angle_pd_quadrature(
    params: ExperimentParams,
    z: float,
    n_theta: int = 256,
    n_radial: Optional[int] = None,
) -> PolarJointPD:
    """Joint angle distribution by radial quadrature, max-normalized.

    Parameters
    ----------
    n_theta : int
        Angular grid size, even, >= 64. The distribution depends only on
        th_s - th_i, so values form a circulant matrix over this grid.
    n_radial : int, optional
        Initial number of midpoint cells per radius on [0, 5 max(w, sigma)],
        >= 128. Defaults to a width-ratio based choice. The rule is refined
        by doubling until no sample moves by more than 0.1% of the peak.

    Raises
    ------
    RefinementError
        If three doublings fail to stabilize the profile.
    """
    theta = angle_grid(n_theta)
    bw = beam_widths(params, z)
    wide = max(bw.w_z, bw.sigma_z)
    narrow = min(bw.w_z, bw.sigma_z)
    co = angle_kernel_coeffs(params, z)
    R = 5.0 * wide

    if n_radial is None:
        n = _auto_n_radial(wide, narrow)
    else:
        if n_radial < 128:
            raise GridError(f"n_radial must be >= 128, got {n_radial!r}")
        n = int(n_radial)

    prof = _angle_profile(co.C, co.D, R, n, n_theta)
    converged = False
    for _ in range(3):
        finer = _angle_profile(co.C, co.D, R, 2 * n, n_theta)
        delta = np.max(np.abs(prof / prof.max() - finer / finer.max()))
        prof, n = finer, 2 * n
        if delta <= 1e-3:
            converged = True
            break
    if not converged:
        raise RefinementError(
            f"radial quadrature did not stabilize at n_radial={n} "
            f"(last doubling moved the profile by {delta:.2e} of peak)"
        )

    prof = prof / prof.max()
    idx = (np.arange(n_theta)[:, None] - np.arange(n_theta)[None, :]) % n_theta
    values = prof[idx]
    return PolarJointPD(
        theta_s=theta, theta_i=theta.copy(), values=values, method="quadrature"
    )


def conditional_angle_slice(pd: PolarJointPD, theta_i: float = 0.0):
    """Extract the signal-angle distribution at the idler column nearest
    theta_i. Returns (theta_s grid, weights)."""
    wrapped = (theta_i + math.pi) % (2.0 * math.pi) - math.pi
    j = int(np.argmin(np.abs(pd.theta_i - wrapped)))
    return pd.theta_s, pd.values[:, j]


def _circular_stddev_about_peak(
    weights: np.ndarray, window: Optional[float] = None
) -> float:
    """Weighted standard deviation of angle offsets from the peak sample,
    measured on [peak - pi, peak + pi) over a uniform circular grid."""
    n = weights.size
    h = 2.0 * math.pi / n
    k = int(np.argmax(weights))
    off = ((np.arange(n) - k + n // 2) % n - n // 2) * h
    w = np.asarray(weights, dtype=float)
    if window is not None:
        w = np.where(np.abs(off) <= window, w, 0.0)
    p = w / w.sum()
    mu = float(p @ off)
    var = float(p @ (off - mu) ** 2)
    return math.sqrt(var)


def conditional_angle_sigma(
    params: ExperimentParams,
    z: float,
    method: str = "stddev-quadrature",
    n_theta: int = 256,
    n_radial: Optional[int] = None,
    window: Optional[float] = None,
) -> UncertaintyEstimate:
    """Width of the signal-angle distribution conditioned on the idler.

    Two conventions:

    "stddev-quadrature"
        Circular standard deviation of the th_i = 0 slice of the
        quadrature distribution, about its peak, optionally restricted to
        ``window`` radians either side of the peak.

    "fwhm-closed-form"
        The full width at half maximum of the equal-radius closed form,
        2 acos(2^{2/3} - (2^{2/3} - 1) |C/D|), with the coefficient ratio
        taken in the pump-dominated limit w0 >> sigma0:

            C/D -> (z^2 + a^2) / (z^2 - a^2),  a = k sigma0 w0.

        Valid in both correlation regimes (peak at 0 for z < a where
        D < 0, at pi for z > a where D > 0). This is the convention that
        reproduces the scaling laws: the width grows as
        4 sqrt(2^{2/3} - 1) z / (k sigma0 w0) for z << a and falls as
        4 sqrt(2^{2/3} - 1) k sigma0 w0 / z for z >> a. When the acos
        argument falls below -1 the profile never drops to half its peak;
        the estimate is then pinned at the uniform value 2 pi / sqrt(12)
        and flagged ``saturated``. The crossing plane z = a (flat
        profile) is reported the same way.
    """
    if method == "fwhm-closed-form":
        a2 = (params.k * params.sigma0 * params.w0) ** 2
        z2 = z * z
        if z2 == a2:
            return UncertaintyEstimate(
                value=UNIFORM_CIRCULAR_STDDEV, method="analytic", z=z, saturated=True
            )
        arg = _HALF_MAX - (_HALF_MAX - 1.0) * (z2 + a2) / abs(z2 - a2)
        if arg < -1.0:
            return UncertaintyEstimate(
                value=UNIFORM_CIRCULAR_STDDEV, method="analytic", z=z, saturated=True
            )
        value = 2.0 * math.acos(min(arg, 1.0))
        return UncertaintyEstimate(value=value, method="analytic", z=z)

    if method == "stddev-quadrature":
        pd = joint_angle_pd_quadrature(params, z, n_theta=n_theta, n_radial=n_radial)
        _, weights = conditional_angle_slice(pd, 0.0)
        value = _circular_stddev_about_peak(weights, window=window)
        return UncertaintyEstimate(value=value, method="quadrature", z=z)

    raise ParameterDomainError(
        f"unknown method {method!r}; expected 'stddev-quadrature' or 'fwhm-closed-form'"
    )
