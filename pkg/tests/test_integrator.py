import math

import numpy as np
import pytest

from relkepler import unperturbed as ua
from relkepler.dynamics import (PerturbationSpec, PhysParams, angular_momentum,
                                hamiltonian_h0, to_cartesian, write_table_csv)
from relkepler.errors import DomainError, NearCollisionError, WindingError
from relkepler.integrator import (DEFAULT_CONFIG, IntegratorConfig, count_crossings, flow_map,
                                  flow_with_tangent, integrate, return_time, winding_number)

P = PhysParams()
COMMENSURABLE = [(1, 2), (1, 3), (2, 3), (2, 5), (3, 5), (5, 8)]
OMEGA = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)


def pericenter(h, L, params=P):
    r_m, _ = ua.radial_bounds(h, abs(L), params)
    return to_cartesian((r_m, 0.0, 0.0, L)).z


def commensurable_orbit(n, k, sign=1, h=0.7):
    L = sign * ua.commensurable_L(n, k, P)
    z0 = pericenter(h, L)
    return integrate(z0, 0.0, n * ua.period_radial(h, P), P), L


def test_config_validation_and_roundtrip():
    with pytest.raises(DomainError):
        IntegratorConfig(rel_tol=0)
    cfg = IntegratorConfig(rel_tol=1e-9, max_step=0.5)
    assert IntegratorConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.replace(abs_tol=1e-13).abs_tol == 1e-13


def test_integrate_requires_forward_span():
    with pytest.raises(DomainError):
        integrate(pericenter(0.7, 1.2), 1.0, 1.0, P)


def test_sample_loop_hits_apsides():
    Th = ua.period_radial(0.7, P)
    traj = integrate(pericenter(0.7, 1.2), 0.0, Th, P)
    r_m, r_M = ua.radial_bounds(0.7, 1.2, P)
    t = np.linspace(0, Th, 4001)
    r = traj.radius_at(t)
    assert r.min() == pytest.approx(r_m, abs=1e-6)
    assert r.max() == pytest.approx(r_M, abs=1e-6)
    # radial momentum vanishes at the apocenter, half a period in
    assert abs(traj.radial_velocity_at(0.5 * Th)) < 1e-6


def test_conservation_over_ten_periods():
    Th = ua.period_radial(0.7, P)
    traj = integrate(pericenter(0.7, 1.2), 0.0, 10 * Th, P)
    H, L = traj.invariants()
    assert np.max(np.abs(H - 0.7)) < 1e-9 * (1 + 0.7)
    assert np.max(np.abs(L - 1.2)) < 1e-9 * 1.2


def test_circular_orbit_stays_circular():
    h = 0.7
    L = math.sqrt(ua.upper_L2(h, P))
    rs = ua.r_star(h, L, P)
    z0 = to_cartesian((rs, 0.0, 0.0, L)).z
    traj = integrate(z0, 0.0, 10 * ua.period_radial(h, P), P)
    assert np.max(np.abs(traj.radius - rs)) < 1e-8
    assert count_crossings(traj, 1.1 * rs).count == 0


def test_reversibility():
    Th = ua.period_radial(0.7, P)
    z0 = pericenter(0.7, 1.2)
    z1 = flow_map(z0, 0.0, Th, P)
    np.testing.assert_allclose(flow_map(z1, Th, -Th, P), z0, atol=1e-8 * (1 + np.abs(z0).max()))


def test_flow_map_zero_span_and_semigroup():
    z0 = pericenter(0.7, 1.2)
    assert np.array_equal(flow_map(z0, 3.0, 0.0, P), z0)
    z2 = flow_map(flow_map(z0, 0.0, 4.0, P), 4.0, 7.0, P)
    np.testing.assert_allclose(z2, flow_map(z0, 0.0, 11.0, P), atol=1e-8)


def test_torus_point_is_periodic():
    tor = ua.make_torus(20 * math.pi, 1, 2, 1, P)
    z0 = pericenter(tor.h, tor.L)
    np.testing.assert_allclose(flow_map(z0, 0.0, tor.T, P), z0, atol=1e-5)
    tight = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    np.testing.assert_allclose(flow_map(z0, 0.0, tor.T, P, config=tight), z0, atol=1e-7)


def test_tangent_zero_span():
    z, M = flow_with_tangent(pericenter(0.7, 1.2), 0.0, 0.0, P)
    assert np.array_equal(M, np.eye(4))


def test_tangent_endpoint_equals_flow_map():
    pert = PerturbationSpec("dipole-cos", period=5.0)
    z0 = pericenter(0.7, 1.2)
    z, _ = flow_with_tangent(z0, 0.0, 9.0, P, 0.01, pert)
    assert np.array_equal(z, flow_map(z0, 0.0, 9.0, P, 0.01, pert))


def test_monodromy_symplectic():
    Th = ua.period_radial(0.7, P)
    _, M = flow_with_tangent(pericenter(0.7, 1.2), 0.0, Th, P)
    assert np.max(np.abs(M.T @ OMEGA @ M - OMEGA)) < 1e-6


@pytest.mark.parametrize("eps,kind", [(0.0, "none"), (0.05, "dipole-cos"), (0.05, "radial-cos")])
def test_tangent_matches_finite_differences(eps, kind):
    pert = PerturbationSpec(kind, period=6.0)
    cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    z0 = pericenter(0.7, 1.2) + np.array([0.0, 0.05, 0.02, 0.0])
    dt = 8.0
    _, M = flow_with_tangent(z0, 0.0, dt, P, eps, pert, cfg)
    h = 1e-7
    fd = np.column_stack([(flow_map(z0 + h * e, 0.0, dt, P, eps, pert, cfg)
                           - flow_map(z0 - h * e, 0.0, dt, P, eps, pert, cfg)) / (2 * h)
                          for e in np.eye(4)])
    assert np.max(np.abs(M - fd)) < 1e-5 * max(1.0, np.abs(M).max())


def test_custom_table_runs_through_python_path(tmp_path):
    T = 6.0
    t = np.linspace(0, T, 17)
    r = np.linspace(0.5, 3.0, 101)
    th = np.linspace(0, 2 * math.pi, 25)
    tt, rr, _ = np.meshgrid(t, r, th, indexing="ij")
    path = tmp_path / "u.csv"
    write_table_csv(path, t, r, th, np.cos(2 * math.pi * tt / T) / rr)
    tab = PerturbationSpec("custom-table", period=T, table_path=str(path))
    ref = PerturbationSpec("radial-cos", period=T)
    z0 = pericenter(0.7, 1.35)
    a = flow_map(z0, 0.0, 3.0, P, 0.01, tab)
    b = flow_map(z0, 0.0, 3.0, P, 0.01, ref)
    np.testing.assert_allclose(a, b, atol=1e-4)
    _, M = flow_with_tangent(z0, 0.0, 3.0, P, 0.01, tab)
    assert M.shape == (4, 4)


def test_tolerance_scaling():
    Th = ua.period_radial(0.7, P)
    z0 = pericenter(0.7, 1.2)
    ref = flow_map(z0, 0.0, 3 * Th, P, config=IntegratorConfig(rel_tol=1e-13, abs_tol=1e-15))
    err = {}
    for rt in (1e-8, 1e-8 / 16):
        err[rt] = np.linalg.norm(flow_map(z0, 0.0, 3 * Th, P,
                                          config=IntegratorConfig(rel_tol=rt, abs_tol=rt / 100))
                                 - ref)
    assert err[1e-8] / err[1e-8 / 16] >= 8


def test_near_collision_raises():
    z0 = np.array([1.0, 0.0, 0.0, 0.0])   # radial infall
    with pytest.raises(NearCollisionError):
        integrate(z0, 0.0, 10.0, P, config=IntegratorConfig(min_radius_guard=1e-3))


def test_theta_unwrapped_and_deterministic():
    traj, _ = commensurable_orbit(5, 8)
    assert np.all(np.abs(np.diff(traj.theta)) < math.pi)
    again, _ = commensurable_orbit(5, 8)
    assert np.array_equal(traj.theta, again.theta)
    assert traj.to_csv() == again.to_csv()


def test_dense_output_matches_restart():
    traj = integrate(pericenter(0.7, 1.2), 0.0, 12.0, P)
    t = 7.3
    np.testing.assert_allclose(traj.state_at(t), flow_map(pericenter(0.7, 1.2), 0.0, t, P),
                               atol=1e-7)
    with pytest.raises(DomainError):
        traj.state_at(13.0)


def test_csv_columns():
    traj = integrate(pericenter(0.7, 1.2), 0.0, 1.0, P)
    lines = traj.to_csv().splitlines()
    assert lines[0] == "t,x1,x2,p1,p2,r,theta_unwrapped,H0,L0"
    assert len(lines) == len(traj.times) + 1


@pytest.mark.parametrize("n,k", COMMENSURABLE)
def test_crossings_and_winding_on_commensurable_orbits(n, k):
    traj, L = commensurable_orbit(n, k)
    cr = count_crossings(traj, ua.r_star(0.7, L, P))
    assert cr.count == 2 * n
    assert np.all(np.abs(cr.slopes) > 1e-6) and not cr.degenerate
    w, res = winding_number(traj)
    assert w == k and res < 1e-6


def test_negative_orientation_winds_backwards():
    traj, _ = commensurable_orbit(1, 2, sign=-1)
    assert winding_number(traj)[0] == -2


def test_winding_rejects_open_curve():
    traj = integrate(pericenter(0.7, 1.2), 0.0, 5.0, P)
    with pytest.raises(WindingError):
        winding_number(traj)


def test_crossing_times_are_polished():
    traj, L = commensurable_orbit(1, 2)
    rs = ua.r_star(0.7, L, P)
    cr = count_crossings(traj, rs)
    assert np.max(np.abs(traj.radius_at(cr.times) - rs)) < 1e-10


def test_return_time_equals_period():
    Th = ua.period_radial(0.7, P)
    traj = integrate(pericenter(0.7, 1.2), 0.0, 1.3 * Th, P)
    assert return_time(traj) == pytest.approx(Th, rel=1e-6)


def test_default_config_values():
    assert DEFAULT_CONFIG.rel_tol == 1e-10 and DEFAULT_CONFIG.abs_tol == 1e-12
    assert DEFAULT_CONFIG.min_radius_guard == 1e-6


def test_perturbed_energy_changes():
    pert = PerturbationSpec("radial-cos", period=3.0)
    traj = integrate(pericenter(0.7, 1.2), 0.0, 5.0, P, 0.1, pert)
    H, L = traj.invariants()
    assert np.ptp(H) > 1e-4
    # radial-cos is rotation invariant, so L0 is still conserved
    assert np.ptp(L) < 1e-8
    assert hamiltonian_h0(traj.states[0, :4], P) == pytest.approx(0.7)
    assert angular_momentum(traj.states[-1, :4]) == pytest.approx(1.2, rel=1e-8)
