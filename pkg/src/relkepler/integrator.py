"""Adaptive propagation of the (perturbed) flow.

Dormand-Prince 5(4) with PI step-size control and the standard fourth-order
continuous extension. Built-in perturbations run through compiled kernels;
tabulated ones use the same stepping loop in pure Python.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .dynamics import (TWO_PI, PerturbationSpec, PhysParams, angular_momentum, as_z,
                       hamiltonian_h0, vector_field, vector_field_jacobian)
from .errors import (DomainError, IntegrationError, NearCollisionError, StiffnessError,
                     WindingError)


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    min_radius_guard: float = 1e-6
    max_steps: int = 2_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not 0 < v <= 1e-3:
                raise DomainError(f"{name} must lie in (0, 1e-3], got {v!r}")
        if not self.min_radius_guard > 0:
            raise DomainError("min_radius_guard must be positive")
        if not self.max_step > 0:
            raise DomainError("max_step must be positive")

    def replace(self, **kw):
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return IntegratorConfig(**d)

    def to_dict(self):
        return {"rel_tol": self.rel_tol, "abs_tol": self.abs_tol,
                "max_step": None if math.isinf(self.max_step) else self.max_step,
                "min_radius_guard": self.min_radius_guard}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("max_step") is None:
            d.pop("max_step", None)
        return cls(**d)


DEFAULT_CONFIG = IntegratorConfig()


def _prm(params, eps, pert):
    prm = np.zeros(K.N_PRM)
    prm[K.P_M] = params.m
    prm[K.P_C] = params.c
    prm[K.P_ALPHA] = params.alpha
    prm[K.P_EPS] = eps
    if pert is not None and pert.kind != "none" and eps != 0.0:
        prm[K.P_KIND] = pert.code
        prm[K.P_AMP] = pert.amplitude
        prm[K.P_PERIOD] = pert.period
    else:
        prm[K.P_PERIOD] = 1.0
    return prm


def _python_path(eps, pert):
    return eps != 0.0 and pert is not None and pert.kind == "custom-table"


def _run(z0, t0, t1, params, eps, pert, config, tangent, record):
    config = config or DEFAULT_CONFIG
    if eps < 0:
        raise DomainError(f"eps must be non-negative, got {eps!r}")
    y0 = as_z(z0)
    if tangent:
        y0 = np.concatenate([y0, np.eye(4).reshape(16)])
    prm = _prm(params, eps, pert)
    args = (tangent, prm, float(t0), y0, float(t1), config.rel_tol, config.abs_tol,
            float(config.max_step), config.min_radius_guard, 4, record, config.max_steps)
    if _python_path(eps, pert):
        if tangent:
            def f(t, y, _prm):
                out = np.empty(20)
                out[:4] = vector_field(t, y[:4], params, eps, pert)
                A = _fd_jacobian(t, y[:4], params, eps, pert)
                out[4:] = (A @ y[4:].reshape(4, 4)).reshape(16)
                return out
        else:
            def f(t, y, _prm):
                return vector_field(t, y, params, eps, pert)
        status, n, ts, ys, th, cf = K.dp5(f, *args)
    else:
        status, n, ts, ys, th, cf = K.dp5_jit(None, *args)
    if status == K.ST_COLLISION:
        raise NearCollisionError(
            f"radius fell below {config.min_radius_guard!r} at t={ts[n - 1]!r}")
    if status == K.ST_UNDERFLOW:
        raise StiffnessError(f"step size underflow near t={ts[n - 1]!r}")
    if status == K.ST_MAXSTEPS:
        raise StiffnessError(f"step budget of {config.max_steps} exhausted")
    return n, ts, ys, th, cf


def _fd_jacobian(t, z, params, eps, pert, step=1e-7):
    A = np.empty((4, 4))
    for j in range(4):
        dz = np.zeros(4)
        dz[j] = step
        A[:, j] = (vector_field(t, z + dz, params, eps, pert)
                   - vector_field(t, z - dz, params, eps, pert)) / (2 * step)
    return A


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted steps of one integration plus their dense-output coefficients.

    ``theta`` is the unwrapped polar angle at the sample times.
    """

    times: np.ndarray
    states: np.ndarray
    theta: np.ndarray
    coeffs: np.ndarray
    params: PhysParams = field(default_factory=PhysParams)
    eps: float = 0.0
    pert: PerturbationSpec | None = None

    @property
    def t0(self):
        return float(self.times[0])

    @property
    def t1(self):
        return float(self.times[-1])

    @property
    def radius(self):
        return np.hypot(self.states[:, 0], self.states[:, 1])

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = min(self.t0, self.t1), max(self.t0, self.t1)
        if np.any((t < lo - 1e-12 * max(1.0, abs(lo))) | (t > hi + 1e-12 * max(1.0, abs(hi)))):
            raise DomainError(f"time outside trajectory span [{lo}, {hi}]")
        if self.times.shape[0] == 1:
            return np.zeros(t.shape, dtype=int), np.zeros(t.shape)
        forward = self.t1 > self.t0
        tt = self.times if forward else self.times[::-1]
        idx = np.searchsorted(tt, t, side="right") - 1
        idx = np.clip(idx, 0, len(tt) - 2)
        if not forward:
            idx = len(tt) - 2 - idx
        h = self.times[idx + 1] - self.times[idx]
        s = (t - self.times[idx]) / h
        return idx, s

    def state_at(self, t):
        """Dense-output state at time(s) ``t``; shape ``(4,)`` or ``(len(t), 4)``."""
        scalar = np.ndim(t) == 0
        idx, s = self._locate(np.atleast_1d(t))
        if self.times.shape[0] == 1:
            out = np.repeat(self.states[:1, :4], len(idx), axis=0)
        else:
            c = self.coeffs[idx][:, :, :4]
            s = s[:, None]
            s1 = 1.0 - s
            out = c[:, 0] + s * (c[:, 1] + s1 * (c[:, 2] + s * (c[:, 3] + s1 * c[:, 4])))
        return out[0] if scalar else out

    def radius_at(self, t):
        z = self.state_at(t)
        return np.hypot(z[..., 0], z[..., 1])

    def theta_at(self, t):
        """Unwrapped polar angle by continuation from the enclosing step."""
        scalar = np.ndim(t) == 0
        tq = np.atleast_1d(t)
        idx, _ = self._locate(tq)
        z = self.state_at(tq)
        x0 = self.states[idx, :2]
        d = np.arctan2(x0[:, 0] * z[:, 1] - x0[:, 1] * z[:, 0],
                       x0[:, 0] * z[:, 0] + x0[:, 1] * z[:, 1])
        out = self.theta[idx] + d
        return float(out[0]) if scalar else out

    def radial_velocity_at(self, t):
        z = np.atleast_2d(self.state_at(t))
        m, mc = self.params.m, self.params.m * self.params.c
        g = np.sqrt(1.0 + (z[:, 2] ** 2 + z[:, 3] ** 2) / mc**2)
        r = np.hypot(z[:, 0], z[:, 1])
        rdot = (z[:, 0] * z[:, 2] + z[:, 1] * z[:, 3]) / (m * g * r)
        return float(rdot[0]) if np.ndim(t) == 0 else rdot

    def invariants(self):
        """``(H0, L0)`` at every stored sample."""
        H = np.array([hamiltonian_h0(z[:4], self.params) for z in self.states])
        L = self.states[:, 0] * self.states[:, 3] - self.states[:, 1] * self.states[:, 2]
        return H, L

    def to_csv(self, path=None):
        """Columns ``t,x1,x2,p1,p2,r,theta_unwrapped,H0,L0``; floats with 17 digits."""
        H, L = self.invariants()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x1", "x2", "p1", "p2", "r", "theta_unwrapped", "H0", "L0"])
        r = self.radius
        for i in range(len(self.times)):
            row = [self.times[i], *self.states[i, :4], r[i], self.theta[i], H[i], L[i]]
            w.writerow([format(float(v), ".17g") for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def integrate(z0, t0, t1, params, eps=0.0, pert=None, config=None):
    if not t1 > t0:
        raise DomainError(f"integrate needs t1 > t0, got t0={t0!r}, t1={t1!r}")
    n, ts, ys, th, cf = _run(z0, t0, t1, params, eps, pert, config, False, True)
    return Trajectory(ts[:n].copy(), ys[:n].copy(), th[:n].copy(), cf[: n - 1].copy(),
                      params, eps, pert)


def flow_map(z0, t0, dt, params, eps=0.0, pert=None, config=None):
    """State at ``t0 + dt`` of the solution through ``z0`` at ``t0``; ``dt`` may be negative."""
    if dt == 0:
        return as_z(z0).copy()
    n, ts, ys, th, cf = _run(z0, t0, t0 + dt, params, eps, pert, config, False, False)
    return ys[n - 1, :4].copy()


def flow_with_tangent(z0, t0, dt, params, eps=0.0, pert=None, config=None):
    """Endpoint and 4x4 derivative of the flow map with respect to ``z0``.

    The step sequence is controlled by the state components only, so the
    endpoint coincides with :func:`flow_map` for the built-in perturbations.
    """
    if dt == 0:
        return as_z(z0).copy(), np.eye(4)
    n, ts, ys, th, cf = _run(z0, t0, t0 + dt, params, eps, pert, config, True, False)
    y = ys[n - 1]
    return y[:4].copy(), y[4:].reshape(4, 4).copy()


class Crossings(NamedTuple):
    count: int
    times: np.ndarray
    slopes: np.ndarray
    degenerate: bool


def _sign_changes(traj, g, subdiv=4):
    """Bracketing intervals of sign changes of ``g(t)`` on the half-open span."""
    ts = traj.times
    if len(ts) < 2:
        return []
    grid = [ts[0]]
    for a, b in zip(ts[:-1], ts[1:]):
        grid.extend(a + (b - a) * np.arange(1, subdiv + 1) / subdiv)
    grid = np.array(grid)
    grid[-1] = ts[-1]
    vals = g(grid)
    out = []
    for i in range(len(grid) - 1):
        va, vb = vals[i], vals[i + 1]
        if va == 0.0:
            out.append((grid[i], grid[i]))
        elif va * vb < 0:
            out.append((grid[i], grid[i + 1]))
    return out


def find_roots(traj, g, xtol=1e-12):
    """Times in ``[t0, t1)`` where the scalar function ``g`` of time changes sign."""
    roots = []
    for a, b in _sign_changes(traj, g):
        if a == b:
            roots.append(a)
        else:
            roots.append(brentq(lambda s: float(g(np.array([s]))[0]), a, b, xtol=xtol,
                                rtol=4 * np.finfo(float).eps))
    return np.array(roots)


def count_crossings(traj, r_marker, slope_tol=1e-8):
    """Times where ``|x(t)| = r_marker`` on ``[t0, t1)`` and the radial velocity there."""
    times = find_roots(traj, lambda t: traj.radius_at(t) - r_marker)
    slopes = traj.radial_velocity_at(times) if len(times) else np.array([])
    slopes = np.atleast_1d(slopes)
    degenerate = bool(np.any(np.abs(slopes) < slope_tol))
    return Crossings(len(times), times, slopes, degenerate)


def winding_number(traj, tol=0.01):
    """``(round(k), |k - round(k)|)`` with ``k = (theta_end - theta_start) / 2 pi``."""
    k = (traj.theta[-1] - traj.theta[0]) / TWO_PI
    kr = round(k)
    res = abs(k - kr)
    if res >= tol:
        raise WindingError(f"angular variation {k:.6f} turns is not an integer")
    return int(kr), res


def return_time(traj):
    """First time after ``t0`` at which the radial momentum crosses zero upward."""
    def l(t):
        z = traj.state_at(t)
        return (z[:, 0] * z[:, 2] + z[:, 1] * z[:, 3]) / np.hypot(z[:, 0], z[:, 1])

    roots = find_roots(traj, l)
    for t in roots:
        if t > traj.t0 and traj.radial_velocity_at(t + 1e-6) > 0 and l(np.array([t - 1e-6]))[0] < 0:
            return float(t)
    raise IntegrationError("no pericenter return found in the trajectory")
