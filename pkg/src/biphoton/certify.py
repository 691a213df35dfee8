"""EPR uncertainty products and entanglement-revival root finding.

The certificate multiplies conditional uncertainties in conjugate bases:
position times momentum, or angle times OAM. A product below 0.5 (in units
of hbar) certifies entanglement. The position-momentum product grows
monotonically and never returns below the bound; the angle-OAM product
rises as the angular correlation flattens, then falls again once the
photons anti-correlate in angle, producing a revival whose distance this
module locates by bisection.

The conjugate-basis widths Delta_l and Delta_p enter as measured constants
supplied by the caller; only the angle and position factors are computed
from the model. Angle widths here use the full-circle standard deviation
so clean and turbulent scans are directly comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .angular import conditional_angle_sigma
from .errors import ConfigError, ParameterDomainError
from .optics import (
    ExperimentParams,
    conditional_position_sigma,
)
from .turbulence import TurbulenceParams, conditional_angle_sigma_turbulent

__all__ = [
    "ENTANGLEMENT_BOUND",
    "EprProduct",
    "Crossing",
    "ScanResult",
    "epr_product",
    "epr_scan",
    "find_revival",
]

ENTANGLEMENT_BOUND = 0.5

BASES = ("position-momentum", "angle-oam")


@dataclass(frozen=True)
class EprProduct:
    """An EPR product at one plane. ``components`` holds the two factors
    (computed basis uncertainty, supplied conjugate constant); ``product``
    is exactly their product, in units of hbar."""

    basis: str
    z: float
    product: float
    components: Tuple[float, float]
    entangled: bool


@dataclass(frozen=True)
class Crossing:
    """A threshold crossing. ``direction`` is "loss" when the product rises
    through the bound and "revival" when it falls back below."""

    z: float
    direction: str


@dataclass
class ScanResult:
    zs: np.ndarray
    products: np.ndarray
    crossings: List[Crossing] = field(default_factory=list)


def _z_seed(turb: TurbulenceParams, z: float) -> int:
    """Deterministic per-plane master seed for turbulent evaluations."""
    ss = np.random.SeedSequence((turb.seed, int(round(z * 1e6))))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def epr_product(
    basis: str,
    params: ExperimentParams,
    z: float,
    delta_conjugate: Optional[float] = None,
    turb: Optional[TurbulenceParams] = None,
    n_theta: int = 128,
    pairs_per_realization: int = 128,
    n_realizations: Optional[int] = None,
) -> EprProduct:
    """EPR product at plane z.

    Parameters
    ----------
    basis : str
        "position-momentum" or "angle-oam".
    delta_conjugate : float
        The measured conjugate-basis width: Delta_p in hbar per metre for
        position-momentum, Delta_l in hbar for angle-oam. Required.
    turb : TurbulenceParams, optional
        For the angle-oam basis only: compute the angle factor behind a
        turbulence screen when z lies beyond it (planes at or before the
        screen are unaffected and use the clean width).
    """
    if basis not in BASES:
        raise ParameterDomainError(f"unknown basis {basis!r}; expected one of {BASES}")
    if delta_conjugate is None:
        raise ConfigError(
            f"basis {basis!r} needs the measured conjugate uncertainty "
            "(delta_p in hbar/m, or delta_l in hbar)"
        )
    if delta_conjugate <= 0:
        raise ParameterDomainError("the conjugate uncertainty must be positive")

    if basis == "position-momentum":
        if turb is not None:
            raise ParameterDomainError(
                "turbulence is modeled for the angle-oam basis only"
            )
        sigma = conditional_position_sigma(params, z).value
    else:
        if turb is not None and z > turb.d:
            sigma = conditional_angle_sigma_turbulent(
                params,
                turb,
                z,
                window=None,
                n_theta=n_theta,
                pairs_per_realization=pairs_per_realization,
                n_realizations=n_realizations,
                seed=_z_seed(turb, z),
            ).value
        else:
            sigma = conditional_angle_sigma(
                params, z, method="stddev-quadrature", n_theta=n_theta
            ).value

    product = sigma * delta_conjugate
    return EprProduct(
        basis=basis,
        z=z,
        product=product,
        components=(sigma, delta_conjugate),
        entangled=product < ENTANGLEMENT_BOUND,
    )


def _detect_crossings(zs, gs) -> List[Tuple[int, str]]:
    out = []
    for i in range(len(zs) - 1):
        if gs[i] < 0 <= gs[i + 1]:
            out.append((i, "loss"))
        elif gs[i] >= 0 > gs[i + 1]:
            out.append((i, "revival"))
    return out


def epr_scan(
    params: ExperimentParams,
    basis: str,
    zs: Sequence[float],
    delta_conjugate: Optional[float] = None,
    turb: Optional[TurbulenceParams] = None,
    **kwargs,
) -> ScanResult:
    """Evaluate the EPR product over an increasing grid of planes and tag
    bound crossings (no refinement; see find_revival for that)."""
    zs = np.asarray(list(zs), dtype=float)
    if zs.size < 2 or np.any(np.diff(zs) <= 0):
        raise ParameterDomainError("z grid must be strictly increasing, length >= 2")
    products = np.array(
        [
            epr_product(basis, params, z, delta_conjugate, turb=turb, **kwargs).product
            for z in zs
        ]
    )
    gs = products - ENTANGLEMENT_BOUND
    crossings = [
        Crossing(z=0.5 * (zs[i] + zs[i + 1]), direction=d)
        for i, d in _detect_crossings(zs, gs)
    ]
    return ScanResult(zs=zs, products=products, crossings=crossings)


def find_revival(
    params: ExperimentParams,
    turb: Optional[TurbulenceParams],
    delta_l: Optional[float],
    z_range: Tuple[float, float] = (1e-3, 1.0),
    resolution: float = 1e-3,
    n_grid: int = 48,
    scan_step: float = 0.02,
    **kwargs,
) -> ScanResult:
    """Locate angle-OAM bound crossings, refined by bisection.

    A coarse scan brackets every sign change of (product - 0.5); each
    bracket is bisected down to ``resolution`` (1 mm by default). The clean
    scan uses a logarithmic grid over ``z_range``; the turbulent scan walks
    linearly in steps of ``scan_step`` starting just beyond the screen. An
    absent sign change yields an empty crossing list, not an error.
    """
    if delta_l is None:
        raise ConfigError("find_revival needs the measured OAM width delta_l")
    lo, hi = float(z_range[0]), float(z_range[1])
    if not (0 < lo < hi):
        raise ParameterDomainError(f"bad z_range {z_range!r}")

    if turb is None:
        zs = np.geomspace(lo, hi, n_grid)
    else:
        lo = max(lo, turb.d + resolution)
        if lo >= hi:
            raise ParameterDomainError(
                f"z_range {z_range!r} lies entirely before the screen at {turb.d}"
            )
        n = max(int(math.ceil((hi - lo) / scan_step)) + 1, 2)
        zs = np.linspace(lo, hi, n)

    def g(z: float) -> float:
        return (
            epr_product("angle-oam", params, z, delta_l, turb=turb, **kwargs).product
            - ENTANGLEMENT_BOUND
        )

    gs = np.array([g(z) for z in zs])
    crossings = []
    for i, direction in _detect_crossings(zs, gs):
        a, b = float(zs[i]), float(zs[i + 1])
        fa, fb = float(gs[i]), float(gs[i + 1])
        while b - a > resolution:
            mid = 0.5 * (a + b)
            fm = g(mid)
            if (fa < 0) != (fm < 0):
                b, fb = mid, fm
            else:
                a, fa = mid, fm
        crossings.append(Crossing(z=0.5 * (a + b), direction=direction))

    return ScanResult(zs=zs, products=gs + ENTANGLEMENT_BOUND, crossings=crossings)
