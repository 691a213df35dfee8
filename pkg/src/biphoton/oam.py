"""Orbital angular momentum statistics of the biphoton.

OAM conservation pins the clean joint spectrum to the anti-diagonal
l_i = -l_s, so everything reduces to the conditional distribution
P(l_s | l_i = 0). Two phenomenological forms cover the cases of interest:

  delta-gaussian   S0 * delta(l) + N * exp(-l^2 / (2 sigma_f^2))
  exp-gaussian     a * exp(-b |l|) + N * exp(-l^2 / (2 sigma_f^2))

the first for clean propagation with detector noise, the second for the
spectrum behind a turbulence screen. Uncertainties are plain standard
deviations of the normalized integer-valued distribution, in units of
hbar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    DegenerateFitError,
    FitError,
    GridError,
    InsufficientDataError,
    ParameterDomainError,
)
from .optics import UncertaintyEstimate

__all__ = [
    "OamDistribution",
    "OamNoiseModel",
    "conditional_oam_clean",
    "joint_oam_clean",
    "oam_model_distribution",
    "oam_uncertainty",
    "fit_oam_model",
]

DEFAULT_LMAX = 15


@dataclass
class OamDistribution:
    """Probabilities on the symmetric integer range [-Lmax, Lmax]."""

    ls: np.ndarray
    probabilities: np.ndarray
    normalized: bool = True


@dataclass
class OamNoiseModel:
    """Parameters of the two conditional OAM model forms.

    S0 and (N, sigma_f) belong to the delta-gaussian form; (a, b) to the
    exponential form. A fitted model carries residual diagnostics.
    """

    S0: float = 0.0
    N: float = 0.0
    sigma_f: float = 0.0
    a: float = 0.0
    b: float = 0.0
    diagnostics: Optional[dict] = None


def _l_range(Lmax: int) -> np.ndarray:
    if Lmax < 1:
        raise ParameterDomainError(f"Lmax must be a positive integer, got {Lmax!r}")
    return np.arange(-int(Lmax), int(Lmax) + 1)


def _gauss_term(ls: np.ndarray, sigma_f: float) -> np.ndarray:
    if sigma_f == 0.0:
        return (ls == 0).astype(float)
    return np.exp(-(ls.astype(float) ** 2) / (2.0 * sigma_f**2))


def oam_model_distribution(
    noise: OamNoiseModel, form: str, Lmax: int = DEFAULT_LMAX
) -> OamDistribution:
    """Evaluate one of the model forms on [-Lmax, Lmax], normalized."""
    ls = _l_range(Lmax)
    if form == "delta-gaussian":
        vals = noise.S0 * (ls == 0) + noise.N * _gauss_term(ls, noise.sigma_f)
    elif form == "exp-gaussian":
        vals = noise.a * np.exp(-noise.b * np.abs(ls)) + noise.N * _gauss_term(
            ls, noise.sigma_f
        )
    else:
        raise ParameterDomainError(
            f"unknown form {form!r}; expected 'delta-gaussian' or 'exp-gaussian'"
        )
    total = vals.sum()
    if total <= 0:
        raise ParameterDomainError("model has no probability mass")
    return OamDistribution(ls=ls, probabilities=vals / total, normalized=True)


def conditional_oam_clean(noise: OamNoiseModel, Lmax: int = DEFAULT_LMAX) -> OamDistribution:
    """Conditional OAM distribution for clean propagation.

    P(l | 0) ~ S0 * delta(l) + N * exp(-l^2 / (2 sigma_f^2)), normalized on
    [-Lmax, Lmax]. Lmax must be at least 5 sigma_f, and the truncated
    Gaussian mass outside the range must stay below 1e-6 of the total.
    """
    if any(v < 0 for v in (noise.S0, noise.N, noise.sigma_f)):
        raise ParameterDomainError("S0, N and sigma_f must be nonnegative")
    if Lmax < 5.0 * noise.sigma_f:
        raise ParameterDomainError(
            f"Lmax={Lmax} is below 5*sigma_f={5.0 * noise.sigma_f:g}"
        )
    dist = oam_model_distribution(noise, "delta-gaussian", Lmax)
    if noise.N > 0 and noise.sigma_f > 0:
        tail_span = np.arange(Lmax + 1, Lmax + 1 + max(int(10 * noise.sigma_f), 20))
        tail = 2.0 * noise.N * np.exp(-(tail_span.astype(float) ** 2) / (2.0 * noise.sigma_f**2))
        kept = noise.S0 + noise.N * _gauss_term(dist.ls, noise.sigma_f).sum()
        if tail.sum() / (kept + tail.sum()) > 1e-6:
            raise GridError(
                f"Lmax={Lmax} truncates more than 1e-6 of the distribution mass"
            )
    return dist


def joint_oam_clean(dist: OamDistribution) -> np.ndarray:
    """Joint matrix P(l_s, l_i) implied by OAM conservation.

    Support lies exactly on the anti-diagonal l_i = -l_s; entry [i, j]
    corresponds to (l_s = ls[i], l_i = ls[j]).
    """
    n = dist.ls.size
    out = np.zeros((n, n))
    out[np.arange(n), n - 1 - np.arange(n)] = dist.probabilities
    return out


def oam_uncertainty(dist: OamDistribution) -> UncertaintyEstimate:
    """Standard deviation of the integer-valued distribution, in hbar."""
    p = np.asarray(dist.probabilities, dtype=float)
    total = p.sum()
    if not dist.normalized or abs(total - 1.0) > 1e-9:
        raise ParameterDomainError(
            f"distribution must be normalized (sum={total!r})"
        )
    l = dist.ls.astype(float)
    mean = float(p @ l)
    var = float(p @ (l - mean) ** 2)
    return UncertaintyEstimate(value=math.sqrt(max(var, 0.0)), method="analytic", z=None)


def _fit_statistics(resid: np.ndarray, data: np.ndarray, jac: np.ndarray) -> dict:
    norm = float(np.linalg.norm(resid))
    sv = np.linalg.svd(jac, compute_uv=False)
    return {
        "residual_norm": norm,
        "relative_residual": norm / float(np.linalg.norm(data)),
        "jacobian_condition": float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf,
    }


def _fit_delta_gaussian(ls, p, off_mask) -> OamNoiseModel:
    distinct_off = np.unique(np.abs(ls[off_mask & (p > 0)]))
    if distinct_off.size < 2:
        raise DegenerateFitError(
            "off-peak data cannot separate the noise amplitude and width"
        )
    peak = float(p[ls == 0][0])
    n0 = float(p[off_mask].max())
    pos = p[off_mask] > 0
    s0_guess = math.sqrt(
        max((p[off_mask][pos] @ ls[off_mask][pos].astype(float) ** 2) / p[off_mask][pos].sum(), 0.25)
    )

    def model(theta):
        S0, N, sf = theta
        return S0 * (ls == 0) + N * _gauss_term(ls, sf)

    res = least_squares(
        lambda th: model(th) - p,
        x0=[max(peak - n0, 0.0), max(n0, 1e-9), s0_guess],
        bounds=([0.0, 0.0, 0.05], [np.inf, np.inf, float(np.abs(ls).max())]),
        method="trf",
    )
    if not res.success:
        raise FitError(f"delta-gaussian fit failed: {res.message}")
    sv = np.linalg.svd(res.jac, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise DegenerateFitError("delta-gaussian fit is rank deficient")
    S0, N, sf = res.x
    diags = _fit_statistics(res.fun, p, res.jac)
    return OamNoiseModel(S0=float(S0), N=float(N), sigma_f=float(sf), diagnostics=diags)


def _fit_pure_exponential(ls, p) -> OamNoiseModel:
    pos = p > 0
    if np.unique(np.abs(ls[pos & (ls != 0)])).size < 2:
        raise DegenerateFitError("cannot determine a decay rate from the data")
    absl = np.abs(ls[pos]).astype(float)
    slope = np.polyfit(absl, np.log(p[pos]), 1)[0]
    b0 = max(-slope, 1e-3)

    def resid(theta):
        a, b = theta
        return a * np.exp(-b * np.abs(ls)) - p

    res = least_squares(resid, x0=[float(p.max()), b0], bounds=([0.0, 0.0], [np.inf, np.inf]), method="trf")
    if not res.success:
        raise FitError(f"exponential fit failed: {res.message}")
    diags = _fit_statistics(res.fun, p, res.jac)
    diags["note"] = "gaussian noise term collapsed; refit as pure exponential"
    return OamNoiseModel(a=float(res.x[0]), b=float(res.x[1]), diagnostics=diags)


def _fit_exp_gaussian(ls, p, off_mask) -> OamNoiseModel:
    pos = p > 0
    absl = np.abs(ls[pos]).astype(float)
    slope = np.polyfit(absl, np.log(p[pos]), 1)[0]
    b0 = max(-slope, 1e-3)

    def model(theta):
        a, b, N, sf = theta
        return a * np.exp(-b * np.abs(ls)) + N * _gauss_term(ls, sf)

    res = least_squares(
        lambda th: model(th) - p,
        x0=[float(p.max()), b0, 0.1 * float(p.max()), 1.5],
        bounds=([0.0, 0.0, 0.0, 0.05], [np.inf, np.inf, np.inf, float(np.abs(ls).max())]),
        method="trf",
    )
    if not res.success:
        raise FitError(f"exp-gaussian fit failed: {res.message}")
    a, b, N, sf = res.x
    sv = np.linalg.svd(res.jac, compute_uv=False)
    if N <= 1e-6 * max(a, 1e-300) or sv[-1] <= 1e-12 * sv[0]:
        # The gaussian component is unidentifiable (exactly exponential
        # data); report the exponential submodel instead of a junk width.
        return _fit_pure_exponential(ls, p)
    diags = _fit_statistics(res.fun, p, res.jac)
    return OamNoiseModel(
        a=float(a), b=float(b), N=float(N), sigma_f=float(sf), diagnostics=diags
    )


def fit_oam_model(samples: OamDistribution, form: str) -> OamNoiseModel:
    """Least-squares fit of one model form to a measured distribution.

    Requires at least 7 distinct l values with nonzero probability. For
    the delta-gaussian form, data with no off-peak support short-circuit
    to the pure delta model (S0=1, N=0). A fit whose design cannot
    constrain the parameters raises DegenerateFitError.
    """
    ls = np.asarray(samples.ls)
    p = np.asarray(samples.probabilities, dtype=float)
    if ls.shape != p.shape or ls.ndim != 1:
        raise ParameterDomainError("ls and probabilities must be matching 1-D arrays")
    if form not in ("delta-gaussian", "exp-gaussian"):
        raise ParameterDomainError(
            f"unknown form {form!r}; expected 'delta-gaussian' or 'exp-gaussian'"
        )
    if not np.any(ls == 0):
        raise ParameterDomainError("the l grid must contain l = 0")

    off_mask = ls != 0
    if form == "delta-gaussian" and not np.any(p[off_mask] > 0):
        # a pure point mass is an exact solution, no fit required
        return OamNoiseModel(
            S0=1.0, N=0.0, sigma_f=0.0,
            diagnostics={"residual_norm": 0.0, "relative_residual": 0.0},
        )
    if np.count_nonzero(p) < 7:
        raise InsufficientDataError(
            f"need >= 7 distinct l values with nonzero counts, got {np.count_nonzero(p)}"
        )
    if form == "delta-gaussian":
        return _fit_delta_gaussian(ls, p, off_mask)
    return _fit_exp_gaussian(ls, p, off_mask)
