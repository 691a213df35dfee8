import math

import numpy as np
import pytest

import biphoton as bp
from biphoton.errors import GridError, ParameterDomainError

import oracles


def test_derived_constants(params):
    assert params.k == pytest.approx(math.pi / 355e-9, rel=1e-14)
    assert params.sigma0 == pytest.approx(oracles.birth_zone_width(), rel=1e-12)
    # reference value for this geometry: 11.3 um to within 0.1 um
    assert abs(params.sigma0 - 11.3e-6) < 0.1e-6


@pytest.mark.parametrize("w0,L,lam", [(0, 5e-3, 355e-9), (507e-6, -1, 355e-9), (507e-6, 5e-3, 0)])
def test_derive_params_rejects_nonpositive(w0, L, lam):
    with pytest.raises(ParameterDomainError):
        bp.derive_params(w0, L, lam)


def test_derive_params_warns_when_waist_close_to_birth_zone():
    with pytest.warns(UserWarning):
        bp.derive_params(50e-6, 5e-3, 355e-9)


def test_beam_widths_growth(params):
    at0 = bp.beam_widths(params, 0.0)
    assert at0.w_z == params.w0
    assert at0.sigma_z == params.sigma0
    mid = bp.beam_widths(params, 5.0)
    assert mid.w_z == pytest.approx(
        params.w0 * math.hypot(1.0, 5.0 / (params.k * params.w0**2)), rel=1e-12
    )
    assert mid.sigma_z == pytest.approx(
        params.sigma0 * math.hypot(1.0, 5.0 / (params.k * params.sigma0**2)), rel=1e-12
    )
    # Linear growth holds once z dwarfs the Rayleigh distance of each
    # width (2.27 m for the pump, 1.14 mm for the birth zone).
    far = bp.beam_widths(params, 100.0)
    assert far.w_z == pytest.approx(100.0 / (params.k * params.w0), rel=1e-3)
    assert far.sigma_z == pytest.approx(100.0 / (params.k * params.sigma0), rel=1e-3)
    with pytest.raises(ParameterDomainError):
        bp.beam_widths(params, -0.01)


def test_joint_position_pd_normalization_and_symmetry(params):
    dist = bp.joint_position_pd(params, 0.01)
    assert dist.values.max() == 1.0
    assert np.array_equal(dist.values, dist.values.T)
    assert dist.axis1.size == 512


@pytest.mark.parametrize(
    "grid",
    [
        np.linspace(-1, 1, 5),
        np.linspace(1, -1, 64),
        np.concatenate([np.linspace(-1, 0, 32), np.linspace(0.001, 1, 32)]),
    ],
)
def test_joint_position_pd_rejects_bad_grids(params, grid):
    with pytest.raises(GridError):
        bp.joint_position_pd(params, 0.0, grid=grid)


def test_joint_position_pd_rejects_truncating_grid(params):
    w = bp.beam_widths(params, 0.0).w_z
    with pytest.raises(GridError, match="truncates"):
        bp.joint_position_pd(params, 0.0, grid=np.linspace(-w, w, 128))


@pytest.mark.parametrize("z", [0.0, 1e-3, 0.05, 0.5, 2.0])
def test_conditional_position_sigma_matches_slice_quadrature(params, z):
    widths = bp.beam_widths(params, z)
    ref = oracles.gaussian_slice_stddev(widths.w_z, widths.sigma_z)
    est = bp.conditional_position_sigma(params, z)
    assert est.value == pytest.approx(ref, rel=1e-6)
    assert est.method == "analytic"
    assert est.z == z


def test_conditional_width_from_gridded_density(params):
    z = 0.02
    dist = bp.joint_position_pd(params, z)
    mid = dist.axis2.size // 2
    col = dist.values[:, mid]
    y = dist.axis1
    mean = np.trapezoid(y * col, y) / np.trapezoid(col, y)
    var = np.trapezoid((y - mean) ** 2 * col, y) / np.trapezoid(col, y)
    est = bp.conditional_position_sigma(params, z)
    assert math.sqrt(var) == pytest.approx(est.value, rel=1e-3)


def test_position_scaling_regimes(params):
    near = bp.position_scaling_regime(params, 1e-3)
    assert near.regime == "near"
    assert near.value == bp.beam_widths(params, 1e-3).sigma_z
    far = bp.position_scaling_regime(params, 5.0)
    assert far.regime == "far"
    assert far.value == bp.beam_widths(params, 5.0).w_z
    mid = bp.position_scaling_regime(params, params.k * params.w0 * params.sigma0)
    assert mid.regime == "crossover"


def test_far_field_conditional_width_tracks_pump_envelope(params):
    z = 5.0
    est = bp.conditional_position_sigma(params, z)
    w = bp.beam_widths(params, z).w_z
    assert est.value == pytest.approx(w, rel=1e-3)


def test_conditional_momentum_sigma(params):
    est = bp.conditional_momentum_sigma(params)
    ref = oracles.momentum_slice_stddev(params.w0, params.sigma0)
    assert est.value == pytest.approx(ref, rel=1e-6)
    assert est.z is None
    # reference value 1.97 per mm, stated in hbar per metre
    assert est.value == pytest.approx(1.97e3, rel=5e-3)


def test_momentum_sigma_from_fourier_plane(params):
    # 22.3 um measured camera width at f = 100 mm maps through k/f
    est = bp.momentum_sigma_from_fourier_plane(22.3e-6, 0.1, params)
    assert est.value == pytest.approx(1973.5, rel=1e-3)
    assert est.method == "analytic"
    direct = bp.conditional_momentum_sigma(params).value
    assert est.value == pytest.approx(direct, rel=1e-2)
    camera = direct * 0.1 / params.k
    back = bp.momentum_sigma_from_fourier_plane(camera, 0.1, params)
    assert back.value == pytest.approx(direct, rel=1e-12)
    with pytest.raises(ParameterDomainError):
        bp.momentum_sigma_from_fourier_plane(22.3e-6, 0.0, params)


def test_uncertainty_product_entangled_at_origin(params):
    prod = (
        bp.conditional_position_sigma(params, 0.0).value
        * bp.conditional_momentum_sigma(params).value
    )
    assert prod < 0.5


def test_momentum_width_independent_of_propagation(params):
    # the momentum estimate depends on crystal constants only; widths at
    # any plane leave it unchanged
    before = bp.conditional_momentum_sigma(params).value
    bp.beam_widths(params, 3.7)
    assert bp.conditional_momentum_sigma(params).value == before


def test_default_position_grid_spans_wide_width(params):
    z = 0.1
    grid = bp.default_position_grid(params, z)
    wide = max(bp.beam_widths(params, z).w_z, bp.beam_widths(params, z).sigma_z)
    assert grid[-1] >= 3.0 * wide
    assert grid.size == 512
