"""Coincidence estimation from frame stacks and the model fits that turn
measured coincidence maps into conditional uncertainties.

The estimator follows the standard photon-counting recipe: the product of
counts in the same frame carries true plus accidental coincidences, the
product between adjacent frames carries accidentals only, and the net map
is their difference. Both sums run over the first N-1 frames (no
wraparound), and the self-coincidence diagonal is excluded from maps and
fits, since a detector's count times itself measures shot noise rather
than pair correlation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    DegenerateFitError,
    FitError,
    GridError,
    InsufficientDataError,
    ParameterDomainError,
)
from .frames import FrameStack
from .optics import UncertaintyEstimate

__all__ = [
    "CoincidenceMap",
    "PositionFitParams",
    "AngleFitParams",
    "coincidence_pixels",
    "coincidence_strips",
    "coincidence_sectors",
    "fit_position_map",
    "fit_angle_map",
]


@dataclass
class CoincidenceMap:
    """Net coincidence map over binned detector regions.

    ``axis`` is "strip" (regions are horizontal strips, coordinates in
    metres at the source plane) or "sector" (angular sectors, coordinates
    in radians). Entry [i, j] pairs region i of the signal arm with region
    j of the idler arm; ``excluded`` marks entries left out of any fit
    (the i = j diagonal). ``frame_pairs`` is the number of frame products
    averaged into each term.
    """

    axis: str
    coord_i: np.ndarray
    coord_j: np.ndarray
    true_term: np.ndarray
    accidental_term: np.ndarray
    net: np.ndarray
    excluded: np.ndarray
    frame_pairs: int


@dataclass
class PositionFitParams:
    """Parameters of the position-map model b*P_r + a*P_n, where P_r is a
    Gaussian in the (sum, difference) coordinates with widths (sigma1,
    sigma2) centered at (mu_sum, mu_diff), and P_n is the same shape with
    the broad noise widths (n, m)."""

    b: float
    a: float
    sigma1: float
    sigma2: float
    mu_sum: float
    mu_diff: float
    n: float
    m: float


@dataclass
class AngleFitParams:
    """Parameters of the angle-map model b / (1 + q cos(dt - c))^{3/2} + a,
    with |q| < 1 and the phase canonicalized to c in (-pi/2, pi/2] (the
    (q, c) and (-q, c+pi) parameterizations coincide)."""

    b: float
    a: float
    q: float
    c: float


def _gram(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Exact Gram products sum_k A[k, i] B[k, j].

    Counts are integers, so float64 arithmetic is exact as long as every
    product and partial sum stays below 2^53; otherwise fall back to
    arbitrary-precision integers.
    """
    hi = float(max(A.max(initial=0), B.max(initial=0)))
    if A.shape[0] * hi * hi < 2**53:
        return A.astype(np.float64).T @ B.astype(np.float64)
    exact = np.dot(A.astype(object).T, B.astype(object))
    return exact.astype(np.float64)


def _frame_series(stack: FrameStack) -> int:
    n = stack.frame_count
    if n < 2:
        raise InsufficientDataError(
            f"need at least 2 frames to separate accidentals, got {n}"
        )
    return n


def coincidence_pixels(stack: FrameStack, p: Tuple[int, int], q: Tuple[int, int]) -> float:
    """Net coincidence rate between two pixels, each given as (row, col)."""
    n = _frame_series(stack)
    np_series = stack.counts[:, p[0], p[1]].astype(np.float64)
    nq_series = stack.counts[:, q[0], q[1]].astype(np.float64)
    m = n - 1
    true = float(np_series[:-1] @ nq_series[:-1]) / m
    acc = float(np_series[:-1] @ nq_series[1:]) / m
    return true - acc


def _map_from_series(series: np.ndarray, axis: str, coords: np.ndarray) -> CoincidenceMap:
    m = series.shape[0] - 1
    true = _gram(series[:-1], series[:-1]) / m
    acc = _gram(series[:-1], series[1:]) / m
    net = true - acc
    nbin = series.shape[1]
    return CoincidenceMap(
        axis=axis,
        coord_i=coords.copy(),
        coord_j=coords.copy(),
        true_term=true,
        accidental_term=acc,
        net=net,
        excluded=np.eye(nbin, dtype=bool),
        frame_pairs=m,
    )


def coincidence_strips(stack: FrameStack, strip_height_px: int) -> CoincidenceMap:
    """Coincidence map over horizontal strips of the sensor.

    Strip coordinates are the physical y positions of strip centers at the
    source plane (demagnified). The equal-strip diagonal is excluded.
    """
    _frame_series(stack)
    g = stack.geometry
    if strip_height_px < 1 or g.height % strip_height_px != 0:
        raise GridError(
            f"strip height {strip_height_px} px does not divide the sensor "
            f"height {g.height} px"
        )
    n_strips = g.height // strip_height_px
    series = stack.counts.reshape(
        stack.frame_count, n_strips, strip_height_px, g.width
    ).sum(axis=(2, 3), dtype=np.int64)
    centers_px = np.arange(n_strips) * strip_height_px + strip_height_px / 2.0
    coords = (centers_px - g.origin[1]) * g.pixel_pitch / g.magnification
    return _map_from_series(series, "strip", coords)


def coincidence_sectors(
    stack: FrameStack,
    n_sectors: int,
    center: Optional[Tuple[float, float]] = None,
    offset: float = 0.0,
) -> CoincidenceMap:
    """Coincidence map over angular sectors about a center pixel.

    ``center`` is a (column, row) pixel coordinate, defaulting to the
    geometry origin; it must lie strictly inside the sensor. Sector 0
    starts at angle -pi + offset and sectors advance counterclockwise;
    coordinates are the sector-center angles in radians.
    """
    _frame_series(stack)
    g = stack.geometry
    if n_sectors < 8:
        raise ParameterDomainError(f"n_sectors must be >= 8, got {n_sectors!r}")
    if center is None:
        center = g.origin
    cx, cy = float(center[0]), float(center[1])
    if not (0.0 < cx < g.width and 0.0 < cy < g.height):
        raise GridError(
            f"sector center {center!r} is not strictly inside the "
            f"{g.width}x{g.height} sensor"
        )

    xs = np.arange(g.width) + 0.5 - cx
    ys = np.arange(g.height) + 0.5 - cy
    angles = np.arctan2(ys[:, None], xs[None, :])
    width = 2.0 * math.pi / n_sectors
    assign = np.floor((angles + math.pi - offset) / width).astype(np.int64) % n_sectors
    assign = assign.ravel()

    series = np.empty((stack.frame_count, n_sectors))
    flat = stack.counts.reshape(stack.frame_count, -1)
    for k in range(stack.frame_count):
        series[k] = np.bincount(assign, weights=flat[k], minlength=n_sectors)
    coords = -math.pi + (np.arange(n_sectors) + 0.5) * width + offset
    return _map_from_series(series, "sector", coords)


def _check_fit_input(cmap: CoincidenceMap) -> np.ndarray:
    usable = ~cmap.excluded
    if np.count_nonzero(usable) < 100:
        raise InsufficientDataError(
            f"need at least 100 non-excluded map entries, got {np.count_nonzero(usable)}"
        )
    return usable


def _fit_diagnostics(res, data_norm: float) -> dict:
    jac = res.jac
    _, s, vt = np.linalg.svd(jac, full_matrices=False)
    dof = max(jac.shape[0] - jac.shape[1], 1)
    s2 = 2.0 * res.cost / dof
    good = s > s[0] * 1e-12
    cov = (vt[good].T / s[good] ** 2) @ vt[good] * s2
    norm = float(np.linalg.norm(res.fun))
    return {
        "residual_norm": norm,
        "relative_residual": norm / data_norm if data_norm > 0 else math.inf,
        "covariance": cov,
        "nfev": int(res.nfev),
        "status": int(res.status),
    }


def fit_position_map(cmap: CoincidenceMap) -> Tuple[PositionFitParams, UncertaintyEstimate]:
    """Fit the two-Gaussian model to a strip coincidence map.

    The fit runs over sum = y_s + y_i and diff = y_s - y_i with the model
    b * G(sum, diff; sigma1, sigma2) + a * G(sum, diff; n, m); the noise
    widths are parameterized as multiples of the signal widths and bounded
    to [5, 1000] so the noise term stays broad. Negative net entries are
    kept. The returned uncertainty is sigma1 sigma2 / sqrt(sigma1^2 +
    sigma2^2), the width of the conditional slice of the fitted Gaussian.
    """
    if cmap.axis != "strip":
        raise ParameterDomainError(f"expected a strip map, got axis={cmap.axis!r}")
    usable = _check_fit_input(cmap)

    P = cmap.coord_i[:, None] + cmap.coord_j[None, :]
    Q = cmap.coord_i[:, None] - cmap.coord_j[None, :]
    P, Q, y = P[usable], Q[usable], cmap.net[usable].astype(np.float64)

    w = np.clip(y, 0.0, None)
    if w.sum() <= 0:
        raise DegenerateFitError("map has no positive net signal to seed the fit")
    d0 = float(w @ P) / w.sum()
    f0 = float(w @ Q) / w.sum()
    s10 = math.sqrt(float(w @ (P - d0) ** 2) / w.sum())
    s20 = math.sqrt(float(w @ (Q - f0) ** 2) / w.sum())
    span1 = float(P.max() - P.min())
    span2 = float(Q.max() - Q.min())
    s10 = min(max(s10, 1e-3 * span1), span1)
    s20 = min(max(s20, 1e-3 * span2), span2)
    b0 = float(y.max())
    if b0 <= 0:
        raise DegenerateFitError("map peak is not positive")

    def model(theta):
        b, a, s1, s2, d, f, rn, rm = theta
        gs = np.exp(-((P - d) ** 2) / (2 * s1**2) - ((Q - f) ** 2) / (2 * s2**2))
        gn = np.exp(
            -((P - d) ** 2) / (2 * (rn * s1) ** 2) - ((Q - f) ** 2) / (2 * (rm * s2) ** 2)
        )
        return b * gs + a * gn

    x0 = [b0, 0.05 * b0, s10, s20, d0, f0, 8.0, 8.0]
    lo = [0.0, 0.0, 1e-4 * span1, 1e-4 * span2, P.min(), Q.min(), 5.0, 5.0]
    hi = [np.inf, np.inf, 2 * span1, 2 * span2, P.max(), Q.max(), 1e3, 1e3]
    res = least_squares(
        lambda th: model(th) - y,
        x0=np.clip(x0, lo, hi),
        bounds=(lo, hi),
        method="trf",
        xtol=1e-8,
        max_nfev=1800,
    )
    if not res.success:
        raise FitError(
            f"position fit did not converge (residual norm "
            f"{float(np.linalg.norm(res.fun)):.3g}): {res.message}"
        )
    b, a, s1, s2, d, f, rn, rm = res.x
    params = PositionFitParams(
        b=float(b),
        a=float(a),
        sigma1=float(s1),
        sigma2=float(s2),
        mu_sum=float(d),
        mu_diff=float(f),
        n=float(rn * s1),
        m=float(rm * s2),
    )
    delta = s1 * s2 / math.hypot(s1, s2)
    diags = _fit_diagnostics(res, float(np.linalg.norm(y)))
    est = UncertaintyEstimate(value=float(delta), method="fitted", z=None, diagnostics=diags)
    return params, est


def _canonical_angle_params(b: float, a: float, q: float, c: float):
    c = (c + math.pi) % (2.0 * math.pi) - math.pi
    if c <= -math.pi / 2.0 or c > math.pi / 2.0:
        q = -q
        c = (c + 2.0 * math.pi) % (2.0 * math.pi) - math.pi
        c = c - math.pi if c > 0 else c + math.pi
    return b, a, q, c


def fit_angle_map(cmap: CoincidenceMap) -> Tuple[AngleFitParams, UncertaintyEstimate]:
    """Fit b / (1 + q cos(dt - c))^{3/2} + a to a sector coincidence map.

    The modulation is optimized as q = tanh(u) so the denominator stays
    positive throughout the iteration. The returned uncertainty is the
    circular standard deviation of the fitted modulated profile about its
    peak, evaluated on a fine angular grid.
    """
    if cmap.axis != "sector":
        raise ParameterDomainError(f"expected a sector map, got axis={cmap.axis!r}")
    usable = _check_fit_input(cmap)

    dt = cmap.coord_i[:, None] - cmap.coord_j[None, :]
    dt, y = dt[usable], cmap.net[usable].astype(np.float64)

    # Delta-theta marginal seeds the phase and the modulation contrast.
    nbins = cmap.coord_i.size
    width = 2.0 * math.pi / nbins
    bins = np.floor((dt + 2.0 * math.pi + 0.5 * width) / width).astype(np.int64) % nbins
    marg = np.bincount(bins, weights=y, minlength=nbins) / np.maximum(
        np.bincount(bins, minlength=nbins), 1
    )
    peak_dt = (float(np.argmax(marg)) * width) % (2.0 * math.pi)
    top = float(marg.max())
    bot = float(marg.min())
    if not math.isfinite(top) or top <= bot:
        raise DegenerateFitError("angle map carries no modulation to fit")
    contrast = min((top - bot) / (abs(top) + abs(bot) + 1e-300), 0.95)
    # A peak near dt=0 means the denominator is smallest there: q < 0.
    if math.cos(peak_dt) > 0:
        q0, c0 = -contrast, peak_dt
    else:
        q0, c0 = contrast, peak_dt - math.pi
    u0 = math.atanh(max(min(q0, 0.95), -0.95))

    def model(theta):
        b, a, u, c = theta
        q = math.tanh(u)
        return b * (1.0 + q * np.cos(dt - c)) ** -1.5 + a

    b0 = max(top - bot, 1e-12)
    res = least_squares(
        lambda th: model(th) - y,
        x0=[b0, bot, u0, c0],
        bounds=([0.0, -np.inf, -5.0, -math.pi], [np.inf, np.inf, 5.0, math.pi]),
        method="trf",
        xtol=1e-8,
        max_nfev=1000,
    )
    if not res.success:
        raise FitError(
            f"angle fit did not converge (residual norm "
            f"{float(np.linalg.norm(res.fun)):.3g}): {res.message}"
        )
    b, a, u, c = res.x
    b, a, q, c = _canonical_angle_params(float(b), float(a), math.tanh(float(u)), float(c))
    params = AngleFitParams(b=b, a=a, q=q, c=c)

    # Width of the fitted modulated term alone, on a fine circular grid.
    fine = 4096
    grid = -math.pi + np.arange(fine) * (2.0 * math.pi / fine)
    prof = (1.0 + q * np.cos(grid - c)) ** -1.5
    k = int(np.argmax(prof))
    off = ((np.arange(fine) - k + fine // 2) % fine - fine // 2) * (2.0 * math.pi / fine)
    p = prof / prof.sum()
    mu = float(p @ off)
    sigma = math.sqrt(float(p @ (off - mu) ** 2))
    diags = _fit_diagnostics(res, float(np.linalg.norm(y)))
    diags["modulation_parameterization"] = "q = tanh(u)"
    est = UncertaintyEstimate(value=sigma, method="fitted", z=None, diagnostics=diags)
    return params, est
