import numpy as np
import pytest

import biphoton as bp
from biphoton import ConfigError, ParameterDomainError


def test_entanglement_bound_is_one_half():
    assert bp.ENTANGLEMENT_BOUND == 0.5


def test_unknown_basis_rejected(params):
    with pytest.raises(ParameterDomainError, match="basis"):
        bp.epr_product("spin", params, 0.1, 1.0)


def test_missing_conjugate_width_is_a_config_error(params):
    with pytest.raises(ConfigError):
        bp.epr_product("position-momentum", params, 0.1)
    with pytest.raises(ParameterDomainError):
        bp.epr_product("position-momentum", params, 0.1, delta_conjugate=0.0)
    with pytest.raises(ParameterDomainError):
        bp.epr_product("angle-oam", params, 0.1, delta_conjugate=-1.0)


def test_turbulence_only_applies_to_angle_oam(params, screen):
    with pytest.raises(ParameterDomainError):
        bp.epr_product("position-momentum", params, 0.3, 1971.9, turb=screen)


def test_position_product_is_width_times_conjugate(params):
    dp = 1.9718936e3
    res = bp.epr_product("position-momentum", params, 0.02, dp)
    sigma = bp.conditional_position_sigma(params, 0.02).value
    assert res.product == pytest.approx(sigma * dp, rel=1e-12)
    assert res.components == (sigma, dp)
    assert res.basis == "position-momentum"
    assert res.z == 0.02


def test_position_product_entangled_near_not_far(params):
    dp = 1.9718936e3
    near = bp.epr_product("position-momentum", params, 1e-3, dp)
    far = bp.epr_product("position-momentum", params, 5.0, dp)
    assert near.entangled and near.product < 0.5
    assert not far.entangled and far.product > 0.5


def test_angle_product_uses_full_circle_width(params):
    res = bp.epr_product("angle-oam", params, 0.05, 0.72, n_theta=128)
    sigma = bp.conditional_angle_sigma(
        params, 0.05, method="stddev-quadrature", n_theta=128
    ).value
    assert res.product == pytest.approx(sigma * 0.72, rel=1e-12)


def test_turbulent_product_before_screen_matches_clean(params, screen):
    clean = bp.epr_product("angle-oam", params, 0.10, 0.94)
    shadowed = bp.epr_product("angle-oam", params, 0.10, 0.94, turb=screen)
    assert shadowed.product == clean.product


def test_turbulent_product_is_deterministic_per_plane(params, screen):
    kwargs = dict(n_theta=64, pairs_per_realization=64, n_realizations=2000)
    a = bp.epr_product("angle-oam", params, 0.30, 0.94, turb=screen, **kwargs)
    b = bp.epr_product("angle-oam", params, 0.30, 0.94, turb=screen, **kwargs)
    assert a.product == b.product
    c = bp.epr_product("angle-oam", params, 0.31, 0.94, turb=screen, **kwargs)
    assert c.product != a.product


def test_turbulence_widens_the_angle_correlation(params, screen):
    kwargs = dict(n_theta=64, pairs_per_realization=64, n_realizations=2000)
    clean = bp.epr_product("angle-oam", params, 0.30, 0.94)
    turb = bp.epr_product("angle-oam", params, 0.30, 0.94, turb=screen, **kwargs)
    assert turb.product > clean.product


def test_scan_requires_increasing_grid(params):
    with pytest.raises(ParameterDomainError):
        bp.epr_scan(params, "position-momentum", [0.1], 1971.9)
    with pytest.raises(ParameterDomainError):
        bp.epr_scan(params, "position-momentum", [0.1, 0.1, 0.2], 1971.9)
    with pytest.raises(ParameterDomainError):
        bp.epr_scan(params, "position-momentum", [0.2, 0.1], 1971.9)


def test_scan_tags_a_loss_crossing(params):
    zs = [0.005, 0.01, 0.05, 0.1]
    res = bp.epr_scan(params, "position-momentum", zs, 1.9718936e3)
    assert res.products.shape == (4,)
    assert np.all(np.diff(res.products) > 0)
    assert len(res.crossings) == 1
    cr = res.crossings[0]
    assert cr.direction == "loss"
    assert 0.01 < cr.z < 0.05


def test_scan_tags_loss_then_revival(params):
    zs = [0.002, 0.05, 2.0]
    res = bp.epr_scan(params, "angle-oam", zs, 0.72, n_theta=128)
    directions = [c.direction for c in res.crossings]
    assert directions == ["loss", "revival"]


def test_find_revival_validates_inputs(params, screen):
    with pytest.raises(ConfigError):
        bp.find_revival(params, None, None)
    with pytest.raises(ParameterDomainError):
        bp.find_revival(params, None, 0.72, z_range=(0.5, 0.1))
    with pytest.raises(ParameterDomainError):
        bp.find_revival(params, screen, 0.94, z_range=(0.01, 0.1))


def test_find_revival_with_weak_conjugate_width_finds_nothing(params):
    res = bp.find_revival(params, None, 0.01, n_grid=12, n_theta=64)
    assert res.crossings == []
    assert np.all(res.products < 0.5)


def test_find_revival_refines_to_resolution(params):
    # The product crosses 0.5 twice for delta_l = 0.72; both crossings must
    # be located and ordered, with a gap wider than the bisection step.
    res = bp.find_revival(
        params, None, 0.72, z_range=(1e-3, 1.0), resolution=2e-3,
        n_grid=16, n_theta=96,
    )
    directions = [c.direction for c in res.crossings]
    assert directions == ["loss", "revival"]
    z_loss, z_rev = res.crossings[0].z, res.crossings[1].z
    assert z_loss < z_rev
    assert bp.epr_product("angle-oam", params, z_loss - 2e-3, 0.72, n_theta=96).entangled
    assert bp.epr_product("angle-oam", params, z_rev + 2e-3, 0.72, n_theta=96).entangled


def test_find_revival_turbulent_walks_past_the_screen(params, screen):
    res = bp.find_revival(
        params, screen, 0.01, z_range=(0.05, 0.27), scan_step=0.06,
        n_theta=64, pairs_per_realization=128, n_realizations=6000,
    )
    assert res.crossings == []
    assert np.all(res.zs > screen.d)
