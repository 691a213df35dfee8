"""End-to-end checks of the package's headline numbers.

Each test pins one quantitative requirement: derived constants, EPR
products and their bound crossings, scaling exponents, Monte Carlo
validation against direct quadrature, frame-level fits, and the storage
format. The terminal summary reports one PASS/FAIL line per criterion.
"""

import gc
import hashlib
import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

import biphoton as bp

import oracles


def test_criterion_01_birth_zone_width(params):
    # 507 um pump waist, 5 mm crystal, 355 nm pump -> 11.3 um birth zone.
    assert params.sigma0 == pytest.approx(11.3e-6, abs=0.1e-6)


def test_criterion_02_momentum_width_is_plane_independent(params):
    est = bp.conditional_momentum_sigma(params)
    # 1.97 hbar per mm, within 0.5 percent.
    assert est.value * 1e-3 == pytest.approx(1.97, rel=5e-3)
    # Propagation adds only a momentum-space phase: the estimator carries
    # no plane argument at all and declares z = None.
    assert est.z is None
    # The Fourier-plane route at two different focal lengths returns the
    # same width from consistent camera measurements.
    f1, f2 = 0.1, 0.25
    cam1 = est.value * f1 / params.k
    cam2 = est.value * f2 / params.k
    v1 = bp.momentum_sigma_from_fourier_plane(cam1, f1, params).value
    v2 = bp.momentum_sigma_from_fourier_plane(cam2, f2, params).value
    assert v1 == pytest.approx(v2, rel=1e-12)
    assert v1 == pytest.approx(est.value, rel=1e-12)


def test_criterion_03_clean_revival_distance(params):
    t0 = time.monotonic()
    res = bp.find_revival(params, None, 0.72)
    elapsed = time.monotonic() - t0

    revivals = [c for c in res.crossings if c.direction == "revival"]
    assert len(revivals) == 1
    z_rev = revivals[0].z
    assert z_rev == pytest.approx(0.22, rel=0.10)

    # Independent far-field estimate: the angular width falls as F a / z
    # with F = 4 sqrt(2^(2/3) - 1), so the product with delta_l crosses
    # 0.5 at z = F a delta_l / 0.5.
    a = params.k * params.sigma0 * params.w0
    z_closed = 4.0 * math.sqrt(2.0 ** (2.0 / 3.0) - 1.0) * a * 0.72 / 0.5
    assert z_closed == pytest.approx(0.225, rel=0.02)
    assert z_rev == pytest.approx(z_closed, rel=0.05)
    assert elapsed < 60.0


def test_criterion_04_turbulent_revival_distance(params, screen):
    t0 = time.monotonic()
    res = bp.find_revival(params, screen, 0.94, z_range=(0.16, 0.6))
    elapsed = time.monotonic() - t0

    assert [c.direction for c in res.crossings] == ["revival"]
    assert res.crossings[0].z == pytest.approx(0.35, rel=0.15)
    assert elapsed < 600.0


def test_criterion_05_scaling_exponents(params):
    t0 = time.monotonic()

    zs = np.geomspace(1e-3, 1e-2, 9)
    widths = [
        bp.conditional_angle_sigma(params, z, method="fwhm-closed-form").value
        for z in zs
    ]
    slope_near = np.polyfit(np.log(zs), np.log(widths), 1)[0]
    assert slope_near == pytest.approx(1.0, abs=0.05)

    zs = np.geomspace(1.0, 5.0, 9)
    widths = [
        bp.conditional_angle_sigma(params, z, method="fwhm-closed-form").value
        for z in zs
    ]
    slope_far = np.polyfit(np.log(zs), np.log(widths), 1)[0]
    assert slope_far == pytest.approx(-1.0, abs=0.05)

    # The far-field conditional position width tracks the pump width
    # w(z), which grows linearly only well beyond the pump Rayleigh
    # distance k w0^2 = 2.27 m; sample a band an order of magnitude out.
    zs = np.geomspace(20.0, 100.0, 9)
    deltas = [bp.conditional_position_sigma(params, z).value for z in zs]
    slope_pos = np.polyfit(np.log(zs), np.log(deltas), 1)[0]
    assert slope_pos == pytest.approx(1.0, abs=0.05)

    assert time.monotonic() - t0 < 60.0


def test_criterion_06_correlation_sign_flip(params):
    # Angle: the conditional peak sits at delta-theta = 0 in the near
    # field and at pi in the far field, exactly on the discrete grid.
    pd = bp.joint_angle_pd_quadrature(params, 1e-3, n_theta=128)
    theta, sl = bp.conditional_angle_slice(pd, 0.0)
    assert int(np.argmax(sl)) == 64  # theta_s = 0
    pd = bp.joint_angle_pd_quadrature(params, 0.5, n_theta=128)
    theta, sl = bp.conditional_angle_slice(pd, 0.0)
    assert int(np.argmax(sl)) == 0  # theta_s = -pi

    # Position: the joint-density covariance changes sign between the
    # same planes.
    near = bp.joint_position_pd(params, 1e-3)
    cov_near = float(
        (near.values * near.axis1[:, None] * near.axis2[None, :]).sum()
    )
    far = bp.joint_position_pd(params, 0.5)
    cov_far = float((far.values * far.axis1[:, None] * far.axis2[None, :]).sum())
    assert cov_near > 0
    assert cov_far < 0


def test_criterion_07_monte_carlo_matches_direct_quadrature():
    # Small instance kept tractable for the 8-dimensional reference
    # quadrature: 60 um waist, 20 um birth zone, screen at 3 mm with
    # r = 50 um, observed at 40 mm.
    w0, sigma0, lam = 60e-6, 20e-6, 355e-9
    L = 2.0 * math.pi * sigma0**2 / (0.455 * lam)
    with pytest.warns(UserWarning):
        p7 = bp.derive_params(w0, L, lam)
    assert p7.sigma0 == pytest.approx(sigma0, rel=1e-12)
    turb7 = bp.derive_turbulence(p7, 3e-3, 50e-6)

    t0 = time.monotonic()
    pd = bp.joint_angle_pd_turbulent(
        p7, turb7, 40e-3, n_theta=64,
        pairs_per_realization=128, n_realizations=60000, seed=2,
    )
    theta, mc = bp.conditional_angle_slice(pd, 0.0)

    oracle = oracles.make_csd_oracle(w0, sigma0, lam, 3e-3, 40e-3, 50e-6)
    ref = oracle(theta)
    elapsed = time.monotonic() - t0

    p_mc = mc / mc.sum()
    p_ref = ref / ref.sum()
    assert np.abs(p_mc - p_ref).sum() < 0.02
    assert elapsed < 600.0


def test_criterion_08_turbulent_oam_spectrum(params, screen):
    t0 = time.monotonic()
    s30 = bp.oam_spectrum_turbulent(screen, 0.30)
    s60 = bp.oam_spectrum_turbulent(screen, 0.60)
    assert np.array_equal(s30.ls, s60.ls)
    assert np.abs(s30.probabilities - s60.probabilities).sum() < 0.01

    fit = bp.fit_oam_model(s30, "exp-gaussian")
    assert fit.a > 0 and fit.b > 0
    assert fit.diagnostics["relative_residual"] < 0.02
    assert time.monotonic() - t0 < 60.0


def test_criterion_09_frame_fits_recover_conditional_widths(params):
    t0 = time.monotonic()
    for z, mag in ((1e-3, 4.0), (0.5, 0.25)):
        geometry = bp.FrameGeometry(
            width=32, height=512, pixel_pitch=16e-6, magnification=mag
        )
        model = bp.clean_pair_sampler(params, z)
        stack = bp.generate_frames(
            model, geometry, n_frames=50000, pair_rate=150.0,
            background_rate=0.01, qe=0.6, seed=101,
        )
        cmap = bp.coincidence_strips(stack, 1)
        del stack
        gc.collect()
        _, est = bp.fit_position_map(cmap)
        expected = bp.conditional_position_sigma(params, z).value
        assert est.value == pytest.approx(expected, rel=0.10)

    # Accidental-corrected rates between independent pixel streams are
    # statistically zero: background-only frames, many pixel pairs.
    geometry = bp.FrameGeometry(width=16, height=16, pixel_pitch=16e-6)
    bg = bp.generate_frames(
        bp.clean_pair_sampler(params, 1e-3), geometry, n_frames=4000,
        pair_rate=0.0, background_rate=0.08, qe=0.6, seed=55,
    )
    pix = [(r, c) for r in range(5) for c in range(5)]
    vals = [
        bp.coincidence_pixels(bg, pix[i], pix[j])
        for i in range(len(pix))
        for j in range(i + 1, len(pix))
    ]
    vals = np.array(vals)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean()) < 3.0 * se
    assert time.monotonic() - t0 < 300.0


def test_criterion_10_oam_model_round_trips():
    # Fit round trip on the delta-gaussian form, in normalized units.
    truth = bp.OamNoiseModel(S0=0.6, N=0.1, sigma_f=1.5)
    dist = bp.oam_model_distribution(truth, "delta-gaussian")
    total = truth.S0 + truth.N * np.exp(
        -dist.ls.astype(float) ** 2 / (2.0 * truth.sigma_f**2)
    ).sum()
    fit = bp.fit_oam_model(dist, "delta-gaussian")
    assert fit.S0 == pytest.approx(truth.S0 / total, rel=0.05)
    assert fit.N == pytest.approx(truth.N / total, rel=0.05)
    assert fit.sigma_f == pytest.approx(truth.sigma_f, rel=0.05)

    # Clean-case synthesis: a point mass with a weak Gaussian pedestal
    # reproduces the 0.72 hbar conditional width.
    clean = bp.conditional_oam_clean(bp.OamNoiseModel(S0=1.0, N=0.18700, sigma_f=1.2))
    assert bp.oam_uncertainty(clean).value == pytest.approx(0.72, abs=1e-3)

    # Turbulent-case synthesis: exponential with N/a = 0.05 and
    # sigma_f = 2.0; solving for the decay rate reproduces 0.94 hbar.
    def width_minus_target(b):
        noise = bp.OamNoiseModel(a=1.0, b=b, N=0.05, sigma_f=2.0)
        d = bp.oam_model_distribution(noise, "exp-gaussian")
        return bp.oam_uncertainty(d).value - 0.94

    b_star = brentq(width_minus_target, 0.05, 8.0, xtol=1e-10)
    assert b_star > 0
    noise94 = bp.OamNoiseModel(a=1.0, b=b_star, N=0.05, sigma_f=2.0)
    dist94 = bp.oam_model_distribution(noise94, "exp-gaussian")
    assert bp.oam_uncertainty(dist94).value == pytest.approx(0.94, abs=1e-4)
    fit94 = bp.fit_oam_model(dist94, "exp-gaussian")
    assert fit94.b == pytest.approx(b_star, rel=0.05)
    assert fit94.sigma_f == pytest.approx(2.0, rel=0.05)


def test_criterion_11_stack_round_trip_bit_exact(params, tmp_path):
    geometry = bp.FrameGeometry()  # 512 x 512
    model = bp.clean_pair_sampler(params, 0.1)
    stack = bp.generate_frames(
        model, geometry, n_frames=1000, pair_rate=150.0,
        background_rate=0.05, qe=0.6, seed=9,
    )
    path1 = tmp_path / "stack1.bin"
    path2 = tmp_path / "stack2.bin"
    bp.write_stack(stack, path1)
    loaded = bp.read_stack(path1)
    assert np.array_equal(loaded.counts, stack.counts)
    assert loaded.geometry == stack.geometry
    assert loaded.frame_count == stack.frame_count
    for key in ("z", "seed"):
        assert loaded.metadata[key] == stack.metadata[key]
    bp.write_stack(loaded, path2)
    d1 = hashlib.sha256(path1.read_bytes()).hexdigest()
    d2 = hashlib.sha256(path2.read_bytes()).hexdigest()
    assert d1 == d2
