import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from esspec import fields, spectrum, weyl

# log-log slope of the imaginary branch t = alpha_plus / 2 on the s1 = 0.1
# star at the default x0 (frozen from a 32/64-node step-halved run)
IMAG_BRANCH_SLOPE = 0.9976840182716925


def _range_at_x0(model, omega):
    ms = fields.sample_meridional(model, *weyl.default_x0(model))
    lo, hi = spectrum.alpha_oracle(ms, omega)
    return float(lo), float(hi)


def _hh(model, x0, omega):
    ms = fields.sample_meridional(model, *x0)
    h1, h2 = spectrum.h_blocks(ms, omega)
    return h1 @ h2


@pytest.fixture(scope="module")
def imag_params(baro):
    lo, hi = _range_at_x0(baro, 0.0)
    return weyl.choose_direction(baro, weyl.default_x0(baro), 0.0, 0.5 * hi)


@pytest.fixture(scope="module")
def real_params(convective):
    lo, hi = _range_at_x0(convective, 0.0)
    return weyl.choose_direction(convective, weyl.default_x0(convective), 0.0,
                                 0.5 * lo)


def test_bump_normalization_and_support():
    x, w = np.polynomial.legendre.leggauss(20)
    assert abs(np.sum(w * weyl.BUMP.value(x) ** 2) - 1.0) <= 1e-12
    outside = np.array([-3.0, -1.0, 1.0, 1.5])
    for f in (weyl.BUMP.value, weyl.BUMP.d1, weyl.BUMP.d2):
        assert np.all(f(outside) == 0.0)


@settings(max_examples=100)
@given(xi=st.floats(-0.999, 0.999))
def test_bump_derivatives(xi):
    h = 1e-6
    b = weyl.BUMP
    fd1 = (b.value(xi + h) - b.value(xi - h)) / (2 * h)
    fd2 = (b.d1(xi + h) - b.d1(xi - h)) / (2 * h)
    assert abs(b.d1(xi) - fd1) <= 1e-7
    assert abs(b.d2(xi) - fd2) <= 1e-6


def test_endpoint_plus_gives_larger_eigenvector(baro):
    x0 = weyl.default_x0(baro)
    lo, hi = _range_at_x0(baro, 0.0)
    p = weyl.choose_direction(baro, x0, 0.0, hi)
    ms = fields.sample_meridional(baro, *x0)
    _, vecs = spectrum.symmetric_eig2(spectrum.neg_sym_product(ms, 0.0))
    assert abs(abs(p.c1 @ vecs[:, 1]) - 1.0) <= 1e-12
    assert p.lam.real == 0.0 and p.lam.imag > 0.0


def test_endpoint_minus_gives_smaller_eigenvector(convective):
    x0 = weyl.default_x0(convective)
    lo, hi = _range_at_x0(convective, 0.0)
    p = weyl.choose_direction(convective, x0, 0.0, lo)
    ms = fields.sample_meridional(convective, *x0)
    _, vecs = spectrum.symmetric_eig2(spectrum.neg_sym_product(ms, 0.0))
    assert abs(abs(p.c1 @ vecs[:, 0]) - 1.0) <= 1e-12
    assert p.lam.imag == 0.0 and p.lam.real > 0.0


@pytest.mark.parametrize("omega", [0.0, 0.5])
def test_midpoint_direction_invariants(baro, omega):
    x0 = weyl.default_x0(baro)
    lo, hi = _range_at_x0(baro, omega)
    p = weyl.choose_direction(baro, x0, omega, 0.5 * (lo + hi))
    assert abs(p.c1 @ p.c2) <= 1e-15
    assert abs(np.linalg.norm(p.c1) - 1.0) <= 1e-15
    assert np.array_equal(p.c2, weyl.J @ p.c1)
    hh = _hh(baro, x0, omega)
    assert p.esp1_defect(hh) <= 1e-12 * max(abs(lo), abs(hi))
    assert np.max(weyl.esp5_defect(baro, p)) <= 1e-10
    assert abs(p.lam**2 + p.t) <= 1e-15 * abs(p.t)


def test_direction_errors(baro):
    x0 = weyl.default_x0(baro)
    lo, hi = _range_at_x0(baro, 0.0)
    with pytest.raises(ValueError, match="excluded"):
        weyl.choose_direction(baro, x0, 0.0, 0.0)
    with pytest.raises(ValueError, match="no direction"):
        weyl.choose_direction(baro, x0, 0.0, 2.0 * hi)
    with pytest.raises(ValueError, match="no direction"):
        weyl.choose_direction(baro, x0, 0.0, -0.01)
    with pytest.raises(ValueError):
        weyl.choose_direction(baro, (0.0, 0.5), 0.0, 0.5 * hi)
    with pytest.raises(ValueError):
        weyl.choose_direction(baro, x0, 0.0, 0.5 * hi, nu1=2.0, nu2=1.0)


def test_support_must_fit(baro, imag_params):
    with pytest.raises(ValueError, match="escapes"):
        weyl.SingularSequence(baro, imag_params, 1.0)


def test_flat_norm_scaling(baro, imag_params):
    # int |u_eps|^2 dw dz = eps^(nu2 - nu1) eps^(nu1 + nu2), so the flat norm
    # is eps^nu2, and the c1 derivative has norm eps^(nu2 - nu1) |phi'|
    x, w = np.polynomial.legendre.leggauss(24)
    xi1, xi2 = np.meshgrid(x, x, indexing="ij")
    wt = np.outer(w, w)
    d1_norm = math.sqrt(np.sum(w * weyl.BUMP.d1(x) ** 2))
    for eps in weyl.default_eps():
        seq = weyl.SingularSequence(baro, imag_params, eps)
        u, grad, _ = seq.bump(xi1, xi2)
        area = seq.len1 * seq.len2
        u_norm = math.sqrt(np.sum(wt * u**2) * area)
        dc1 = grad @ imag_params.c1
        dc1_norm = math.sqrt(np.sum(wt * dc1**2) * area)
        assert abs(u_norm / eps**2 - 1.0) <= 1e-12
        assert abs(dc1_norm / (eps * d1_norm) - 1.0) <= 1e-12


def test_weighted_gradient_bounded(baro, imag_params):
    series = weyl.run_series(baro, imag_params)
    grads = np.array([s.grad_norm for s in series.samples])
    assert grads.min() > 0.5 and grads.max() < 2.0
    assert grads.max() / grads.min() < 1.05
    u = np.array([s.u_norm for s in series.samples])
    assert np.all(np.diff(u) < 0.0)


@pytest.mark.parametrize("eps", weyl.default_eps())
def test_kernel_identity(baro, imag_params, eps):
    assert weyl.kernel_check(baro, imag_params, eps) <= 1e-10


def test_kernel_without_j_is_order_one(baro, imag_params):
    assert weyl.kernel_check(baro, imag_params, 2.0**-5, use_j=False) >= 0.1


@pytest.mark.parametrize("m", [1, 2])
def test_azimuthal_kernel(baro, m):
    x0 = weyl.default_x0(baro)
    lo, hi = _range_at_x0(baro, 0.5)
    p = weyl.with_m(weyl.choose_direction(baro, x0, 0.5, 0.5 * (lo + hi)), m)
    seq = weyl.SingularSequence(baro, p, 2.0**-4)
    assert seq.kappa() != 0.0
    for eps in weyl.default_eps():
        assert weyl.kernel_check(baro, p, eps) <= 1e-10
    series = weyl.run_series(baro, p)
    assert series.notes


def test_imaginary_branch_decay(baro, imag_params):
    series = weyl.run_series(baro, imag_params)
    assert all(s.rows34 <= 1e-12 for s in series.samples)
    assert series.fit.monotone and series.fit.verdict
    assert 0.7 <= series.fitted_slope <= 1.3
    assert abs(series.fitted_slope - IMAG_BRANCH_SLOPE) <= 1e-8


def test_real_branch_decay_on_convective_star(convective, real_params):
    assert real_params.lam.imag == 0.0
    series = weyl.run_series(convective, real_params)
    assert all(s.rows34 <= 1e-12 for s in series.samples)
    assert all(s.kernel <= 1e-10 for s in series.samples)
    assert all(s.imag_max == 0.0 for s in series.samples)
    assert series.fit.monotone and 0.7 <= series.fitted_slope <= 1.3
    # the sequence stays bounded away from zero
    norms = np.array([s.g_norm for s in series.samples])
    assert norms.min() > 0.5 * norms.max()


@pytest.mark.parametrize("kwargs", [dict(use_j=False), dict(a_factor=1.1)])
def test_negative_controls_stop_decay(baro, imag_params, kwargs):
    series = weyl.run_series(baro, imag_params, **kwargs)
    assert not series.fit.verdict


def test_scalar_a_is_complex_for_imaginary_lambda(imag_params):
    # the velocity block pairs J c2 with lambda c2, so a carries the phase
    # of 1 / lambda
    assert abs(imag_params.a_scalar.real) <= 1e-12 * abs(imag_params.a_scalar)


def test_weak_pairing_small(baro, imag_params):
    for eps in weyl.default_eps():
        seq_norm = weyl.residual_esp2(baro, imag_params, eps).g_norm
        assert weyl.weak_pairing(baro, imag_params, eps) <= 1e-8 * seq_norm


def test_quadrature_guard(baro, imag_params, monkeypatch):
    with pytest.raises(ValueError):
        weyl.residual_esp2(baro, imag_params, 2.0**-4, nodes=16)
    monkeypatch.setattr(weyl, "_QUAD_TOL", 0.0)
    with pytest.raises(RuntimeError, match="under-resolved"):
        weyl.residual_esp2(baro, imag_params, 2.0**-4)


def test_decay_fit_power_law():
    eps = np.array(weyl.default_eps())
    fit = weyl.decay_fit(eps, eps)
    assert abs(fit.slope - 1.0) <= 1e-12
    assert fit.verdict


def test_decay_fit_constant_series():
    eps = weyl.default_eps()
    assert not weyl.decay_fit(eps, [0.3] * len(eps)).verdict


def test_decay_fit_non_monotone():
    eps = np.array(weyl.default_eps())
    res = eps.copy()
    res[2] = 2.0 * res[1]
    fit = weyl.decay_fit(eps, res)
    assert not fit.monotone and not fit.verdict


def test_decay_fit_needs_two_octaves():
    with pytest.raises(ValueError):
        weyl.decay_fit([0.1, 0.09, 0.08, 0.07], [1, 0.9, 0.8, 0.7])
    with pytest.raises(ValueError):
        weyl.decay_fit([0.1, 0.05, 0.025], [1, 0.5, 0.25])


@settings(max_examples=50)
@given(slope=st.floats(0.1, 3.0), amp=st.floats(1e-3, 1e3))
def test_decay_fit_recovers_slope(slope, amp):
    eps = np.array(weyl.default_eps())
    fit = weyl.decay_fit(eps, amp * eps**slope)
    assert abs(fit.slope - slope) <= 1e-9
    if abs(slope - 0.5) > 1e-9:
        assert fit.verdict == (slope > 0.5)


def test_series_outputs(baro, imag_params, tmp_path):
    import json
    series = weyl.run_series(baro, imag_params, label="demo")
    weyl.write_series_json([series], tmp_path / "w.json")
    weyl.write_series_csv([series], tmp_path / "w.csv")
    data = json.loads((tmp_path / "w.json").read_text())
    assert data["series"][0]["label"] == "demo"
    assert len(data["series"][0]["samples"]) == 5
    eps = series.eps
    assert all(a > b for a, b in zip(eps, eps[1:]))
    rows = (tmp_path / "w.csv").read_text().splitlines()
    assert len(rows) == 6
