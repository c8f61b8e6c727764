import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from relkepler import action_angle as aa
from relkepler import unperturbed as ua
from relkepler.dynamics import PhysParams
from relkepler.errors import DomainError

P = PhysParams()
params_st = st.builds(PhysParams, m=st.floats(0.3, 3), c=st.floats(0.5, 5),
                      alpha=st.floats(0.2, 3))


@st.composite
def closed_pairs(draw, params=None):
    params = params or draw(params_st)
    h = draw(st.floats(0.05, 0.97)) * params.rest_energy
    lo, hi = ua.lower_L2(params), ua.upper_L2(h, params)
    return h, math.sqrt(lo + draw(st.floats(0.02, 0.98)) * (hi - lo)), params


def area_by_quadrature(h, L, params):
    r_m, r_M = ua.radial_bounds(h, L, params)
    val, _ = quad(lambda r: math.sqrt(max(ua.phi(r, h, L, params), 0.0)), r_m, r_M,
                  epsabs=1e-13, epsrel=1e-12, limit=200)
    return 2 * val


@pytest.mark.parametrize("h,L", [(0.7, 1.2), (0.5, 1.05), (0.9, 2.0)])
def test_area_matches_quadrature(h, L):
    assert aa.enclosed_area(h, L, P) == pytest.approx(area_by_quadrature(h, L, P), rel=1e-9)


@given(closed_pairs())
def test_K0_inverts_actions(arg):
    h, L, params = arg
    I = aa.actions_from(h, L, params)
    assert aa.K0(I, params) == pytest.approx(h, rel=1e-10)
    assert aa.hL_from_actions(I, params)[1] == L
    assert aa.is_valid_actions(I, params)


def test_negative_L_uses_modulus():
    assert aa.actions_from(0.7, -1.2, P) == aa.actions_from(0.7, 1.2, P)


def test_gradient_reference_values():
    g = aa.grad_K0(aa.actions_from(0.7, 1.2, P), P)
    np.testing.assert_allclose(g, [0.364213, 0.294673], atol=1e-6)


def test_frequencies_are_radial_and_precession_rates():
    # dK0/dI1 = 2 pi / T_h and dK0/dI2 = dK0/dI1 (Delta theta / 2 pi - 1)
    h, L = 0.7, 1.2
    g = aa.grad_K0(aa.actions_from(h, L, P), P)
    w1 = 2 * math.pi / ua.period_radial(h, P)
    assert g[0] == pytest.approx(w1, rel=1e-13)
    assert g[1] == pytest.approx(w1 * (ua.apsidal_angle(L, P) / (2 * math.pi) - 1), rel=1e-12)


def _fd_step(I, params, frac):
    # stay well inside the action domain near its edges I1 = I2 and c I2 = alpha
    return frac * min(1.0, I.I1 - I.I2, I.I2 - params.alpha / params.c)


def _fd_grad(I, params):
    h = _fd_step(I, params, 1e-5)
    f = lambda a, b: aa.K0((a, b), params)
    return np.array([(f(I.I1 + h, I.I2) - f(I.I1 - h, I.I2)) / (2 * h),
                     (f(I.I1, I.I2 + h) - f(I.I1, I.I2 - h)) / (2 * h)])


def _fd_hess(I, params):
    h = _fd_step(I, params, 1e-4)
    cols = []
    for d in np.eye(2) * h:
        gp = aa.grad_K0((I.I1 + d[0], I.I2 + d[1]), params)
        gm = aa.grad_K0((I.I1 - d[0], I.I2 - d[1]), params)
        cols.append((gp - gm) / (2 * h))
    return np.column_stack(cols)


@given(closed_pairs())
def test_derivatives_match_finite_differences(arg):
    h, L, params = arg
    I = aa.actions_from(h, L, params)
    g = aa.grad_K0(I, params)
    scale = np.abs(g).max()
    np.testing.assert_allclose(g, _fd_grad(I, params), atol=1e-5 * max(scale, 1))
    H = aa.hess_K0(I, params)
    np.testing.assert_allclose(H, _fd_hess(I, params), rtol=1e-5,
                               atol=1e-5 * max(np.abs(H).max(), 1))
    assert np.linalg.det(H) == pytest.approx(aa.det_hess_K0(I, params), rel=1e-8)


def test_hessian_symmetric_and_twist_positive():
    I = aa.actions_from(0.7, 1.2, P)
    H = aa.hess_K0(I, P)
    assert H[0, 1] == H[1, 0]
    assert aa.det_hess_K0(I, P) > 0


def test_domain_checks():
    with pytest.raises(DomainError):
        aa.K0((1.0, 1.0), P)       # I1 - I2 = 0
    with pytest.raises(DomainError):
        aa.K0((2.0, 0.5), P)       # c I2 < alpha
    assert not aa.is_valid_actions((1.0, 2.0), P)


@pytest.mark.parametrize("T,n,k", [
    (20 * math.pi, 1, 2), (20 * math.pi, 1, 3), (60.0, 2, 5), (90.0, 3, 7), (50.0, 2, 7),
])
def test_resonance_vector_integer(T, n, k):
    tor = ua.make_torus(T, n, k, 1, P)
    I = aa.torus_actions(tor, P)
    np.testing.assert_allclose(aa.resonance_vector(I, T, P), [n, k - n], atol=1e-8)


def test_kepler_period_mass_scaling():
    # third law: T = 2 pi a^(3/2) sqrt(m/alpha) with a = alpha/(-2E)
    params = PhysParams(m=2.5, c=1e3, alpha=1.7)
    E = -0.4
    a = params.alpha / (-2 * E)
    expect = 2 * math.pi * a**1.5 * math.sqrt(params.m / params.alpha)
    assert aa.kepler_period(E, params) == pytest.approx(expect, rel=1e-14)
    with pytest.raises(DomainError):
        aa.kepler_period(0.1, params)


def test_nonrelativistic_limits():
    E, L = -0.3, 1.1
    gaps = []
    for c in (10.0, 100.0, 1000.0):
        params = PhysParams(c=c)
        lim = aa.nonrel_limits(params.rest_energy + E, L, params)
        gaps.append(lim.delta_theta - 2 * math.pi)
        if c == 1000.0:
            assert lim.T_h == pytest.approx(lim.T_kepler, rel=1e-4)
            np.testing.assert_allclose(lim.rho_coeffs, lim.ellipse_coeffs, rtol=1e-4)
    slopes = -np.diff(np.log10(gaps))
    np.testing.assert_allclose(slopes, 2.0, atol=0.1)
