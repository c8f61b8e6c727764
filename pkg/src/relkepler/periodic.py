"""T-periodic solutions of the perturbed problem bifurcating from a resonant torus.

The unperturbed torus labelled by ``(T, n, k, sign)`` is filled by the
two-parameter family ``R_omega x*(t + tau)`` of T-periodic solutions, where
``x*`` starts at the pericenter on the positive x1 axis. Seeds are taken from
that family and refined by shooting on ``F(z) = Phi_T(z) - z``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import least_squares, minimize

from . import unperturbed as ua
from .dynamics import (TWO_PI, PhysParams, PerturbationSpec, as_z, rotate_state, to_cartesian,
                       vector_field, velocity_from_momentum)
from .errors import DomainError, IntegrationError, NearCollisionError, WindingError
from .integrator import (IntegratorConfig, count_crossings, flow_map,
                         flow_with_tangent, integrate, winding_number)
from .serialize import dumps

RESIDUAL_TOL = 1e-9
VERIFY_TOL = 1e-7
SLOPE_TOL = 1e-6
# one period of a resonant orbit needs a tight tolerance to reach 1e-9 residuals
SHOOT_CONFIG = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
COARSE_RTOL = 1e-10
COARSE_SWITCH = 1e-4
STALL_WINDOW = 6


@dataclass(frozen=True)
class SeedGrid:
    torus: ua.TorusLabel
    n_omega: int = 12
    n_tau: int = 12

    def __post_init__(self):
        if self.n_omega < 1 or self.n_tau < 1:
            raise DomainError("seed grid needs n_omega, n_tau >= 1")

    def phases(self):
        """``(omega, tau)`` pairs, omega-major."""
        om = TWO_PI * np.arange(self.n_omega) / self.n_omega
        ta = self.torus.T * np.arange(self.n_tau) / self.n_tau
        return [(float(o), float(t)) for o in om for t in ta]


@dataclass(frozen=True)
class SearchConfig:
    n_omega: int = 12
    n_tau: int = 12
    max_iter: int = 25
    tol: float = RESIDUAL_TOL
    tol_state: float = 1e-5
    tol_phase: float | None = None
    verify_rel_tol: float = 1e-13
    verify_abs_tol: float = 1e-15
    verify_tol: float = VERIFY_TOL
    closeness_samples: int = 256
    jobs: int = 1
    integrator: IntegratorConfig = SHOOT_CONFIG

    def to_dict(self):
        d = {k: getattr(self, k) for k in ("n_omega", "n_tau", "max_iter", "tol", "tol_state",
                                           "tol_phase", "verify_rel_tol", "verify_abs_tol",
                                           "verify_tol", "closeness_samples", "jobs")}
        d["integrator"] = self.integrator.to_dict()
        return d


def pericenter_anchor(torus, params):
    r_m, _ = ua.radial_bounds(torus.h, abs(torus.L), params)
    return to_cartesian((r_m, 0.0, 0.0, torus.L)).z


@lru_cache(maxsize=16)
def _reference(torus, params, config):
    return integrate(pericenter_anchor(torus, params), 0.0, torus.T, params, config=config)


def reference_trajectory(torus, params, config=None):
    """Unperturbed solution from the pericenter anchor over one period ``[0, T]``."""
    return _reference(torus, params, config or SHOOT_CONFIG)


def _ref_states(ref, tau):
    T = ref.t1
    return ref.state_at(np.mod(tau, T))


def seed_states(grid, params, config=None):
    """``R_omega x*(tau)`` for every grid phase, omega-major."""
    ref = reference_trajectory(grid.torus, params, config)
    out = []
    for om, tau in grid.phases():
        z = ref.states[0, :4].copy() if tau == 0.0 else ref.state_at(tau)
        out.append(rotate_state(z, om) if om != 0.0 else z)
    return out


@dataclass(eq=False)
class ShootResult:
    converged: bool
    z0: np.ndarray
    residual: float
    iterations: int
    reason: str = ""
    seed: np.ndarray | None = None


def _F(z, T, params, eps, pert, config):
    zT, M = flow_with_tangent(z, 0.0, T, params, eps, pert, config)
    return zT - z, M - np.eye(4)


def chart_basis(z, params):
    """Columns: rotation generator, unperturbed field, unit ``grad H0``, unit ``grad L0``.

    The first two span the tangent of the unperturbed torus through ``z``.
    """
    x, p = z[:2], z[2:]
    r = math.hypot(*x)
    gH = np.concatenate([params.alpha * x / r**3, velocity_from_momentum(p, params)])
    gL = np.array([p[1], -p[0], -x[1], x[0]])
    B = np.empty((4, 4))
    B[:, 0] = [-z[1], z[0], -z[3], z[2]]
    B[:, 1] = vector_field(0.0, z, params)
    B[:, 2] = gH / np.linalg.norm(gH)
    B[:, 3] = gL / np.linalg.norm(gL)
    return B


def chart_map(z, q, params, config=None):
    """``R_{q0} Phi0_{q1}(z + q2 b2 + q3 b3)`` with ``b2, b3`` from :func:`chart_basis`."""
    B = chart_basis(z, params)
    w = z + q[2] * B[:, 2] + q[3] * B[:, 3]
    w = flow_map(w, 0.0, float(q[1]), params, config=config)
    return rotate_state(w, float(q[0])) if q[0] != 0.0 else w


def _lm_step(J, F, res):
    U, s, Vt = np.linalg.svd(J)
    lam = np.zeros(4)
    lam[2:] = max(1e-8, min(0.1 * s[1], res))
    return -Vt.T @ (s / (s * s + lam * lam) * (U.T @ F))


def newton_shoot(seed, T, eps, pert, params, config=None, max_iter=25, tol=RESIDUAL_TOL,
                 accept_tol=VERIFY_TOL):
    """Regularised damped Newton iteration for ``Phi_T(z) = z``.

    Unknowns are local coordinates around the current iterate: a rotation, an
    unperturbed time shift and two moves across the energy and angular momentum
    levels (:func:`chart_map`). Along the torus these are exact symmetries of
    the unperturbed flow, so long steps stay on it. The two smallest singular
    values of the Jacobian get a Levenberg shift and steps are backtracked
    until ``|F|`` decreases. While ``|F|`` is large the flow is evaluated at a
    looser tolerance. Non-convergence gives a failure record; a near-collision
    at the seed propagates as :class:`NearCollisionError`.
    """
    if eps < 0:
        raise DomainError(f"eps must be nonnegative, got {eps!r}")
    fine = config or SHOOT_CONFIG
    coarse = fine.replace(rel_tol=max(fine.rel_tol, COARSE_RTOL),
                          abs_tol=max(fine.abs_tol, COARSE_RTOL * 1e-2))
    z = as_z(seed).copy()
    z_seed = z.copy()
    F, J = _F(z, T, params, eps, pert, fine)
    res = float(np.linalg.norm(F))
    if eps == 0 and res < accept_tol:
        return ShootResult(True, z, res, 0, "unperturbed fixed point", z_seed)
    cfg = coarse if res > COARSE_SWITCH else fine
    if cfg is coarse:
        F, J = _F(z, T, params, eps, pert, cfg)
        res = float(np.linalg.norm(F))
    history = [res]
    for it in range(max_iter):
        if cfg is coarse and res < COARSE_SWITCH:
            cfg = fine
            F, J = _F(z, T, params, eps, pert, cfg)
            res = float(np.linalg.norm(F))
        if res < tol and cfg is fine:
            return ShootResult(True, z, res, it, "converged", z_seed)
        if len(history) > STALL_WINDOW and res > 0.5 * history[-STALL_WINDOW - 1]:
            return ShootResult(False, z, res, it, "stagnated", z_seed)
        step = _lm_step(J @ chart_basis(z, params), F, res)
        t = 1.0
        while t >= 1.0 / 64:
            try:
                zt = chart_map(z, t * step, params, cfg)
                Ft, Jt = _F(zt, T, params, eps, pert, cfg)
                rt = float(np.linalg.norm(Ft))
            except IntegrationError:
                rt = math.inf
            if rt <= (1.0 - 1e-4 * t) * res:
                break
            t *= 0.5
        else:
            return ShootResult(False, z, res, it + 1, "line search failed", z_seed)
        z, F, J, res = zt, Ft, Jt, rt
        history.append(res)
    if res < tol and cfg is fine:
        return ShootResult(True, z, res, max_iter, "converged", z_seed)
    return ShootResult(False, z, res, max_iter, "iteration limit", z_seed)


@dataclass(eq=False)
class PeriodicSolution:
    z0: np.ndarray
    T: float
    eps: float
    residual: float
    winding: int
    crossings: int
    torus: ua.TorusLabel
    trajectory: object = field(repr=False, default=None)
    closeness: float = math.nan
    closeness_phase: tuple = (math.nan, math.nan)
    verified_residual: float = math.nan
    min_slope: float = math.nan
    iterations: int = 0

    def to_dict(self):
        return {"z0": [float(v) for v in self.z0], "residual": self.residual,
                "winding": self.winding, "crossings": self.crossings,
                "closeness": self.closeness}


def _sampled(traj, n_samples):
    t = traj.t0 + (traj.t1 - traj.t0) * np.arange(n_samples) / n_samples
    return t, traj.state_at(t)


def _sup_dist(a, b):
    """``max_t |dx| + |dp|`` over matching rows of two ``(N, 4)`` arrays."""
    d = a - b
    return float(np.max(np.hypot(d[..., 0], d[..., 1]) + np.hypot(d[..., 2], d[..., 3])))


def _rot(z, om):
    """Rotate ``(..., 4)`` states by ``om``, broadcasting ``om`` against ``z[..., 0]``."""
    co, so = np.cos(om), np.sin(om)
    x1, x2, p1, p2 = z[..., 0], z[..., 1], z[..., 2], z[..., 3]
    return np.stack([co * x1 - so * x2, so * x1 + co * x2,
                     co * p1 - so * p2, so * p1 + co * p2], axis=-1)


def torus_distance(traj, ref, omega, tau, n_samples=256):
    """Sup distance between ``traj`` and ``R_omega x*(. + tau)`` on a uniform time grid."""
    t, z = _sampled(traj, n_samples)
    return _sup_dist(z, _rot(_ref_states(ref, t + tau), omega))


def closeness_to_torus(sol, params=None, config=None, n_grid=64, n_samples=None):
    """Distance from ``sol`` to the nearest member of its unperturbed torus family.

    A coarse ``(omega, tau)`` grid is refined by a least-squares fit followed
    by Nelder-Mead on the sup distance itself. Returns ``(distance, (omega, tau))``
    with omega reduced to ``[0, 2 pi)`` and tau to ``[0, T)``.
    """
    params = params or sol.trajectory.params
    n_samples = n_samples or 256
    ref = reference_trajectory(sol.torus, params, config)
    T = sol.T
    t, z = _sampled(sol.trajectory, n_samples)
    oms = TWO_PI * np.arange(n_grid) / n_grid
    best = (math.inf, 0.0, 0.0)
    for tau in T * np.arange(n_grid) / n_grid:
        R = _rot(_ref_states(ref, t + tau)[None, :, :], oms[:, None])
        d = z[None] - R
        dist = np.max(np.hypot(d[..., 0], d[..., 1]) + np.hypot(d[..., 2], d[..., 3]), axis=1)
        j = int(np.argmin(dist))
        if dist[j] < best[0]:
            best = (float(dist[j]), float(oms[j]), float(tau))

    def resid(v):
        return (z - _rot(_ref_states(ref, t + v[1]), v[0])).ravel()

    def sup(v):
        return _sup_dist(z, _rot(_ref_states(ref, t + v[1]), v[0]))

    x0 = np.array(best[1:])
    ls = least_squares(resid, x0, x_scale=[1.0, T / TWO_PI], xtol=1e-14, ftol=1e-14,
                       gtol=1e-14)
    cands = [(best[0], x0), (sup(ls.x), ls.x)]
    nm = minimize(sup, ls.x, method="Nelder-Mead",
                  options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400,
                           "initial_simplex": [ls.x, ls.x + [1e-4, 0], ls.x + [0, 1e-4]]})
    cands.append((float(nm.fun), nm.x))
    d, v = min(cands, key=lambda c: c[0])
    return float(d), (float(np.mod(v[0], TWO_PI)), float(np.mod(v[1], T)))


def verify_solution(shot, torus, eps, pert, params, search=None):
    """Build a :class:`PeriodicSolution` from a converged shot and certify it.

    Returns ``(solution, reasons)``; ``reasons`` is empty when every
    certificate passes.
    """
    search = search or SearchConfig()
    cfg = search.integrator
    reasons = []
    try:
        traj = integrate(shot.z0, 0.0, torus.T, params, eps, pert, cfg)
    except IntegrationError as exc:
        return None, [f"integration: {exc}"]
    try:
        w, _ = winding_number(traj)
    except WindingError:
        w = None
    cr = count_crossings(traj, torus.r_star)
    min_slope = float(np.min(np.abs(cr.slopes))) if cr.count else math.nan
    tight = cfg.replace(rel_tol=search.verify_rel_tol, abs_tol=search.verify_abs_tol)
    try:
        zT = flow_map(shot.z0, 0.0, torus.T, params, eps, pert, tight)
        vres = float(np.linalg.norm(zT - shot.z0))
    except IntegrationError:
        vres = math.inf
    sol = PeriodicSolution(z0=shot.z0, T=torus.T, eps=eps, residual=shot.residual,
                           winding=w if w is not None else 0, crossings=cr.count,
                           torus=torus, trajectory=traj, verified_residual=vres,
                           min_slope=min_slope, iterations=shot.iterations)
    if w != torus.sign * torus.k:
        reasons.append(f"winding {w} != {torus.sign * torus.k}")
    if cr.count != 2 * torus.n:
        reasons.append(f"crossings {cr.count} != {2 * torus.n}")
    elif min_slope <= SLOPE_TOL:
        reasons.append(f"tangential crossing, |rdot| = {min_slope:.3g}")
    if not vres < search.verify_tol:
        reasons.append(f"tight-tolerance residual {vres:.3g}")
    if not reasons:
        sol.closeness, sol.closeness_phase = closeness_to_torus(
            sol, params, cfg, n_samples=search.closeness_samples)
        if not math.isfinite(sol.closeness):
            reasons.append("closeness not finite")
    return sol, reasons


def _lex_key(z):
    return tuple(float(v) for v in z)


def deduplicate(solutions, tol_state=1e-5, tol_phase=None):
    """Merge solutions whose initial states agree within ``tol_state`` (sup norm).

    The lexicographically smallest ``z0`` represents each class. Solutions that
    are distinct as fixed points but lie on the same orbit up to a sub-period
    time shift are kept; :func:`near_duplicates` reports them.
    """
    kept = []
    for s in sorted(solutions, key=lambda s: _lex_key(s.z0)):
        if all(np.max(np.abs(s.z0 - k.z0)) >= tol_state for k in kept):
            kept.append(s)
    return kept


def near_duplicates(solutions, tol_phase, n_shift=1024):
    """Index pairs whose trajectories agree within ``tol_phase`` after a shift ``jT/1024``."""
    samples = [_sampled(s.trajectory, n_shift)[1] for s in solutions]
    pairs = []
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            a, b = samples[i], samples[j]
            best = min(_sup_dist(a, np.roll(b, -s, axis=0)) for s in range(n_shift))
            if best < tol_phase:
                pairs.append((i, j, best))
    return pairs


def _sort_key(s):
    return (s.residual, _lex_key(s.z0))


@dataclass(eq=False)
class SearchResult:
    torus: ua.TorusLabel
    eps: float
    pert: PerturbationSpec | None
    solutions: list
    seeds_tried: int
    converged: int
    deduplicated: int
    rejected: list = field(default_factory=list)
    near_duplicates: list = field(default_factory=list)

    @property
    def degenerate(self):
        return self.eps == 0

    def __len__(self):
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def __getitem__(self, i):
        return self.solutions[i]

    def to_dict(self):
        t = self.torus
        d = {"torus": {"T": t.T, "n": t.n, "k": t.k, "sign": t.sign, "h": t.h, "L": t.L,
                       "r_star": t.r_star},
             "eps": self.eps,
             "perturbation": self.pert.to_dict() if self.pert is not None else {"kind": "none"},
             "solutions": [s.to_dict() for s in self.solutions],
             "seeds_tried": self.seeds_tried, "converged": self.converged,
             "deduplicated": self.deduplicated}
        if self.degenerate:
            d["note"] = "degenerate (unperturbed continuum)"
        return d

    def to_json(self, path=None):
        text = dumps(self.to_dict())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def find_periodic(T, n, k, sign, eps, pert=None, params=None, search=None):
    """Multi-start shooting for T-periodic solutions near the ``(T, n, k, sign)`` torus."""
    params = params or PhysParams()
    search = search or SearchConfig()
    if eps < 0:
        raise DomainError(f"eps must be nonnegative, got {eps!r}")
    torus = ua.make_torus(T, n, k, sign, params)
    grid = SeedGrid(torus, search.n_omega, search.n_tau)
    seeds = seed_states(grid, params, search.integrator)

    def shoot(z):
        try:
            return newton_shoot(z, torus.T, eps, pert, params, search.integrator,
                                search.max_iter, search.tol, search.verify_tol)
        except NearCollisionError as exc:
            return ShootResult(False, z, math.inf, 0, f"near collision: {exc}", z)

    if search.jobs > 1:
        with ThreadPoolExecutor(search.jobs) as ex:
            shots = list(ex.map(shoot, seeds))
    else:
        shots = [shoot(z) for z in seeds]
    good = [s for s in shots if s.converged]
    # dedupe before the costly certification
    reps = deduplicate(good, search.tol_state)
    sols, rejected = [], []
    for s in reps:
        sol, reasons = verify_solution(s, torus, eps, pert, params, search)
        if reasons:
            rejected.append((s, reasons))
        else:
            sols.append(sol)
    sols.sort(key=_sort_key)
    result = SearchResult(torus, eps, pert, sols, len(seeds), len(good), len(reps), rejected)
    if search.tol_phase is not None:
        result.near_duplicates = near_duplicates(sols, search.tol_phase)
    return result


@dataclass(eq=False)
class Branch:
    solutions: list
    eps_values: list
    last_eps: float | None
    failure: str = ""


def continue_in_eps(sol, eps_targets, pert, params=None, search=None):
    """Natural-parameter continuation of ``sol`` along ``eps_targets``.

    Stops at the first eps where shooting or certification fails; ``last_eps``
    is then an empirical lower estimate of the admissible range.
    """
    params = params or sol.trajectory.params
    search = search or SearchConfig()
    z = sol.z0
    out, eps_done = [], []
    for eps in eps_targets:
        try:
            shot = newton_shoot(z, sol.T, eps, pert, params, search.integrator,
                                search.max_iter, search.tol, search.verify_tol)
        except IntegrationError as exc:
            return Branch(out, eps_done, eps_done[-1] if eps_done else None, str(exc))
        if not shot.converged:
            return Branch(out, eps_done, eps_done[-1] if eps_done else None,
                          f"eps={eps}: {shot.reason}")
        new, reasons = verify_solution(shot, sol.torus, eps, pert, params, search)
        if reasons:
            return Branch(out, eps_done, eps_done[-1] if eps_done else None,
                          f"eps={eps}: " + "; ".join(reasons))
        out.append(new)
        eps_done.append(eps)
        z = new.z0
    return Branch(out, eps_done, eps_done[-1] if eps_done else None)
