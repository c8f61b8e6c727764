"""Phase space, Hamiltonians and vector fields of the relativistic Kepler problem.

States are handled numerically as flat float arrays ``z = (x1, x2, p1, p2)``.
:class:`CartesianState` and :class:`PolarState` are light containers for the
public API; every function taking a state accepts either the container or a
length-4 array.

Sign convention: ``J = [[0, 1], [-1, 0]]`` and the angular momentum is
``L0(x, p) = x1*p2 - x2*p1``, positive for counter-clockwise motion.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, InterpolationDomainError

TWO_PI = 2.0 * math.pi

# rotation used in the angular momentum <x, J p>
J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class PhysParams:
    """Mass ``m``, speed of light ``c`` and coupling constant ``alpha``."""

    m: float = 1.0
    c: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        for name in ("m", "c", "alpha"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")

    @property
    def rest_energy(self):
        return self.m * self.c**2

    def to_dict(self):
        return {"m": self.m, "c": self.c, "alpha": self.alpha}


@dataclass(frozen=True)
class CartesianState:
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(2))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).reshape(2))
        if not np.hypot(*self.x) > 0:
            raise DomainError("position must differ from the origin")

    @classmethod
    def from_array(cls, z):
        z = np.asarray(z, dtype=float)
        return cls(z[:2], z[2:4])

    @property
    def z(self):
        return np.concatenate([self.x, self.p])


@dataclass(frozen=True)
class PolarState:
    r: float
    theta: float
    l: float
    Phi: float

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError(f"radius must be positive, got {self.r!r}")

    def as_tuple(self):
        return (self.r, self.theta, self.l, self.Phi)


def as_z(state):
    """Return ``state`` as a float array ``(x1, x2, p1, p2)``."""
    if isinstance(state, CartesianState):
        return state.z
    z = np.asarray(state, dtype=float)
    if z.shape != (4,):
        raise DomainError(f"expected a 4-vector state, got shape {z.shape}")
    return z


def _radius(x):
    r = math.hypot(x[0], x[1])
    if r == 0.0:
        raise DomainError("position at the origin")
    return r


# ---------------------------------------------------------------------------
# Legendre transform and first integrals


def momentum_from_velocity(xdot, params):
    xdot = np.asarray(xdot, dtype=float)
    beta2 = (xdot @ xdot) / params.c**2
    if beta2 >= 1.0:
        raise DomainError(f"superluminal velocity |xdot|/c = {math.sqrt(beta2):.17g}")
    return params.m * xdot / math.sqrt(1.0 - beta2)


def velocity_from_momentum(p, params):
    p = np.asarray(p, dtype=float)
    mc = params.m * params.c
    return p / (params.m * math.sqrt(1.0 + (p @ p) / mc**2))


def hamiltonian_h0(state, params):
    z = as_z(state)
    r = _radius(z[:2])
    p2 = z[2] ** 2 + z[3] ** 2
    mc = params.m * params.c
    return params.rest_energy * math.sqrt(1.0 + p2 / mc**2) - params.alpha / r


def angular_momentum(state):
    z = as_z(state)
    return z[0] * z[3] - z[1] * z[2]


def to_polar(state):
    """Map ``(x, p)`` to ``(r, theta, l, Phi)``; theta lies in ``(-pi, pi]``."""
    z = as_z(state)
    r = _radius(z[:2])
    theta = math.atan2(z[1], z[0])
    l = (z[0] * z[2] + z[1] * z[3]) / r
    return PolarState(r, theta, l, angular_momentum(z))


def to_cartesian(polar):
    r, theta, l, Phi = polar.as_tuple() if isinstance(polar, PolarState) else polar
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r!r}")
    e = np.array([math.cos(theta), math.sin(theta)])
    ie = np.array([-e[1], e[0]])
    return CartesianState(r * e, l * e + (Phi / r) * ie)


def polar_vector_field(polar, params):
    """Right-hand side ``(rdot, thetadot, ldot, Phidot)`` of the polar system."""
    r, _, l, Phi = polar.as_tuple() if isinstance(polar, PolarState) else polar
    m, c, alpha = params.m, params.c, params.alpha
    g = math.sqrt(1.0 + (l**2 + Phi**2 / r**2) / (m * c) ** 2)
    rdot = l / (m * g)
    ldot = Phi**2 / (m * r**3 * g) - alpha / r**2
    thetadot = Phi / (m * r**2 * g)
    return np.array([rdot, thetadot, ldot, 0.0])


def rotate_state(z, omega):
    """Rotate position and momentum blocks by the angle ``omega``."""
    z = as_z(z)
    co, so = math.cos(omega), math.sin(omega)
    R = np.array([[co, -so], [so, co]])
    return np.concatenate([R @ z[:2], R @ z[2:]])


def reflect_state(z):
    """Reflection ``x2 -> -x2, p2 -> -p2``; flips the sign of the angular momentum."""
    z = as_z(z).copy()
    z[1] = -z[1]
    z[3] = -z[3]
    return z


# ---------------------------------------------------------------------------
# Perturbations

PERTURBATION_KINDS = ("none", "dipole-cos", "radial-cos", "custom-table")
KIND_CODES = {"none": 0, "dipole-cos": 1, "radial-cos": 2, "custom-table": 3}


@dataclass
class PerturbationSpec:
    """Time-periodic potential ``U(t, x)``; the strength ``eps`` is passed separately.

    Built-in kinds (``A`` is the amplitude, ``w = 2 pi / T``):

    * ``none``: ``U = 0``
    * ``dipole-cos``: ``U = A cos(w t) x1 / |x|``
    * ``radial-cos``: ``U = A cos(w t) / |x|``
    * ``custom-table``: cubic-spline interpolation of samples of ``U`` on a
      regular ``(t, r, theta)`` grid read from CSV, gradient by central
      differences in ``x``.
    """

    kind: str = "none"
    amplitude: float = 1.0
    period: float = 2.0 * math.pi
    table_path: str | None = None
    fd_step: float = 1e-6
    _table: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise DomainError(f"unknown perturbation kind {self.kind!r}")
        if not (math.isfinite(self.period) and self.period > 0):
            raise DomainError(f"period must be positive, got {self.period!r}")
        if self.kind == "custom-table" and self._table is None:
            if self.table_path is None:
                raise DomainError("custom-table perturbation needs table_path")
            self._table = _UTable.from_csv(self.table_path, self.period)

    @property
    def code(self):
        return KIND_CODES[self.kind]

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d.get("kind", "none"), amplitude=float(d.get("amplitude", 1.0)),
                   period=float(d.get("period", 2.0 * math.pi)),
                   table_path=d.get("table_path"))

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self):
        d = {"kind": self.kind, "amplitude": self.amplitude, "period": self.period}
        if self.table_path is not None:
            d["table_path"] = str(self.table_path)
        return d

    def _envelope(self, t):
        return self.amplitude * math.cos(TWO_PI * math.fmod(t, self.period) / self.period)

    def potential(self, t, x):
        x = np.asarray(x, dtype=float)
        r = _radius(x)
        if self.kind == "none":
            return 0.0
        if self.kind == "dipole-cos":
            return self._envelope(t) * x[0] / r
        if self.kind == "radial-cos":
            return self._envelope(t) / r
        return self._table(t, r, math.atan2(x[1], x[0]))

    def gradient(self, t, x):
        x = np.asarray(x, dtype=float)
        r = _radius(x)
        if self.kind == "none":
            return np.zeros(2)
        if self.kind == "dipole-cos":
            return self._envelope(t) * np.array([x[1] ** 2, -x[0] * x[1]]) / r**3
        if self.kind == "radial-cos":
            return -self._envelope(t) * x / r**3
        h = self.fd_step
        g = np.empty(2)
        for i in range(2):
            dx = np.zeros(2)
            dx[i] = h
            g[i] = (self.potential(t, x + dx) - self.potential(t, x - dx)) / (2 * h)
        return g

    def hessian(self, t, x):
        x = np.asarray(x, dtype=float)
        r = _radius(x)
        if self.kind == "none":
            return np.zeros((2, 2))
        x1, x2 = x
        if self.kind == "dipole-cos":
            off = x2 * (2 * x1**2 - x2**2) / r**5
            return self._envelope(t) * np.array(
                [[-3 * x1 * x2**2 / r**5, off], [off, -x1 / r**3 + 3 * x1 * x2**2 / r**5]])
        if self.kind == "radial-cos":
            return self._envelope(t) * (-np.eye(2) / r**3 + 3 * np.outer(x, x) / r**5)
        h = self.fd_step
        H = np.empty((2, 2))
        for i in range(2):
            dx = np.zeros(2)
            dx[i] = h
            H[:, i] = (self.gradient(t, x + dx) - self.gradient(t, x - dx)) / (2 * h)
        return 0.5 * (H + H.T)


def perturbation_gradient(t, x, pert):
    return pert.gradient(t, x)


class _UTable:
    """Tabulated ``U(t, r, theta)`` with periodic wrap in ``t`` and ``theta``."""

    def __init__(self, t, r, theta, values, period):
        from scipy.interpolate import RegularGridInterpolator

        self.period = period
        self.t, self.r, self.theta = t, r, theta
        self._interp = RegularGridInterpolator((t, r, theta), values, method="cubic",
                                               bounds_error=True)

    @classmethod
    def from_csv(cls, path, period):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(reader.fieldnames) < {"t", "r", "theta", "U"}:
                raise DomainError("custom table needs header t,r,theta,U")
            rows = [(float(row["t"]), float(row["r"]), float(row["theta"]), float(row["U"]))
                    for row in reader]
        data = np.array(rows)
        axes = [np.unique(data[:, i]) for i in range(3)]
        shape = tuple(len(a) for a in axes)
        if np.prod(shape) != len(data):
            raise DomainError("custom table is not a full regular grid")
        values = np.full(shape, np.nan)
        idx = [np.searchsorted(a, data[:, i]) for i, a in enumerate(axes)]
        values[idx[0], idx[1], idx[2]] = data[:, 3]
        return cls(*axes, values, period)

    def __call__(self, t, r, theta):
        tq = math.fmod(t, self.period)
        if tq < 0:
            tq += self.period
        thq = math.fmod(theta, TWO_PI)
        if thq < self.theta[0]:
            thq += TWO_PI
        q = (tq, r, thq)
        for value, axis, name in zip(q, (self.t, self.r, self.theta), ("t", "r", "theta")):
            if not axis[0] <= value <= axis[-1]:
                raise InterpolationDomainError(
                    f"{name}={value:.17g} outside table range [{axis[0]}, {axis[-1]}]")
        return float(self._interp(q))


def write_table_csv(path, t, r, theta, U):
    """Write a sampled potential ``U[i, j, k] = U(t_i, r_j, theta_k)`` as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "r", "theta", "U"])
        for i, ti in enumerate(t):
            for j, rj in enumerate(r):
                for k, thk in enumerate(theta):
                    w.writerow([repr(float(ti)), repr(float(rj)), repr(float(thk)),
                                repr(float(U[i, j, k]))])


# ---------------------------------------------------------------------------
# Vector fields


def vector_field(t, state, params, eps=0.0, pert=None):
    """Return ``(xdot, pdot)`` stacked as a 4-vector."""
    z = as_z(state)
    x, p = z[:2], z[2:]
    r = _radius(x)
    xdot = velocity_from_momentum(p, params)
    pdot = -params.alpha * x / r**3
    if eps != 0.0 and pert is not None and pert.kind != "none":
        pdot = pdot + eps * pert.gradient(t, x)
    return np.concatenate([xdot, pdot])


def vector_field_jacobian(t, state, params, eps=0.0, pert=None):
    """4x4 derivative of :func:`vector_field` with respect to the state."""
    z = as_z(state)
    x, p = z[:2], z[2:]
    r = _radius(x)
    m, mc = params.m, params.m * params.c
    g = math.sqrt(1.0 + (p @ p) / mc**2)
    A = np.zeros((4, 4))
    A[:2, 2:] = (np.eye(2) - np.outer(p, p) / (mc**2 * g**2)) / (m * g)
    A[2:, :2] = -params.alpha * (np.eye(2) / r**3 - 3 * np.outer(x, x) / r**5)
    if eps != 0.0 and pert is not None and pert.kind != "none":
        A[2:, :2] += eps * pert.hessian(t, x)
    return A
