"""Closed-form analysis of the unperturbed problem.

Covers the effective radial function ``phi_{h,L}`` (``l**2 = phi(r)`` along a
motion with energy ``h`` and angular momentum ``L``), the classification of
``(h, L)`` pairs, apsidal radii, radial period, apsidal angle, the explicit
polar orbit, and the constants that select resonant tori of period ``T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import TWO_PI, PhysParams
from .errors import DomainError, HypothesisError, RegimeError

NO_CLOSED_ORBIT = "NoClosedOrbit"
CIRCULAR = "Circular"
CLOSED_NON_CIRCULAR = "ClosedNonCircular"
NO_MOTION = "NoMotion"

# relative tolerance for the equality cases of the classification
EQ_RTOL = 1e-12


def _gap(params, h):
    """``m^2 c^4 - h^2`` computed without cancellation near ``h = m c^2``."""
    mc2 = params.rest_energy
    return (mc2 - h) * (mc2 + h)


def upper_L2(h, params):
    """Upper bound ``alpha^2 m^2 c^2 / (m^2 c^4 - h^2)`` on ``L^2`` for closed orbits."""
    m, c, alpha = params.m, params.c, params.alpha
    return alpha**2 * m**2 * c**2 / _gap(params, h)


def lower_L2(params):
    return params.alpha**2 / params.c**2


def phi(r, h, L, params):
    """Effective radial function; vectorised over ``r``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("phi requires r > 0")
    m, c, alpha = params.m, params.c, params.alpha
    out = ((alpha**2 - L**2 * c**2) / r**2 + 2 * alpha * h / r - _gap(params, h)) / c**2
    return float(out) if out.ndim == 0 else out


def phi_prime(r, h, L, params):
    r = np.asarray(r, dtype=float)
    c, alpha = params.c, params.alpha
    out = -2.0 / (c**2 * r**3) * (alpha**2 - L**2 * c**2 + alpha * h * r)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OrbitClass:
    tag: str
    r_star: float | None = None
    r_min: float | None = None
    r_max: float | None = None
    conditions: dict = field(default_factory=dict)

    @property
    def witness(self):
        if self.r_star is None:
            return None
        return (self.r_star, self.r_min, self.r_max)

    def to_dict(self):
        return {"class": self.tag, "r_star": self.r_star, "r_min": self.r_min,
                "r_max": self.r_max, "conditions": dict(self.conditions)}


def closed_orbit_conditions(h, L, params):
    """Truth values of the four inequalities defining the closed-orbit regime."""
    mc2 = params.rest_energy
    L2 = L * L
    upper = upper_L2(h, params) if 0 < h < mc2 else math.inf
    return {
        "0 < h": h > 0,
        "h < m c^2": h < mc2,
        "L^2 > alpha^2/c^2": L2 > lower_L2(params),
        "L^2 < alpha^2 m^2 c^2/(m^2 c^4 - h^2)": L2 < upper,
    }


def classify(h, L, params):
    m, c, alpha = params.m, params.c, params.alpha
    mc2 = params.rest_energy
    conds = closed_orbit_conditions(h, L, params)
    L2 = L * L
    q = alpha**2 - L2 * c**2
    q_zero = math.isclose(L2 * c**2, alpha**2, rel_tol=EQ_RTOL)

    if q_zero:
        if h == 0:
            return OrbitClass(NO_MOTION, conditions=conds)
        return OrbitClass(NO_CLOSED_ORBIT, conditions=conds)
    rs = q / (-alpha * h) if h != 0 else None
    if rs is not None and rs <= 0:
        rs = None
    if q > 0 or h <= 0 or h >= mc2:
        return OrbitClass(NO_CLOSED_ORBIT, r_star=rs, conditions=conds)
    # Case alpha^2 < L^2 c^2, 0 < h < m c^2
    upper = upper_L2(h, params)
    if math.isclose(L2, upper, rel_tol=EQ_RTOL):
        return OrbitClass(CIRCULAR, r_star=rs, r_min=rs, r_max=rs, conditions=conds)
    if L2 < upper:
        r_m, r_M = _bounds(h, L, params)
        return OrbitClass(CLOSED_NON_CIRCULAR, r_star=rs, r_min=r_m, r_max=r_M,
                          conditions=conds)
    return OrbitClass(NO_CLOSED_ORBIT, r_star=rs, conditions=conds)


def is_closed(h, L, params):
    return classify(h, L, params).tag == CLOSED_NON_CIRCULAR


def require_closed(h, L, params, allow_circular=False):
    cls = classify(h, L, params)
    ok = {CLOSED_NON_CIRCULAR, CIRCULAR} if allow_circular else {CLOSED_NON_CIRCULAR}
    if cls.tag not in ok:
        failed = [k for k, v in cls.conditions.items() if not v]
        raise RegimeError(
            f"(h={h!r}, L={L!r}) is {cls.tag}, closed non-circular orbit required"
            + (f"; violated: {', '.join(failed)}" if failed else ""),
            condition=failed[0] if failed else cls.tag,
            values={"h": h, "L": L, "class": cls.tag})
    return cls


def _bounds(h, L, params):
    m, c, alpha = params.m, params.c, params.alpha
    gap = _gap(params, h)
    delta = alpha**2 * m**2 * c**4 - L**2 * c**2 * gap
    sq = math.sqrt(max(delta, 0.0))
    # r_m computed from the product of roots to avoid cancellation
    r_M = (alpha * h + sq) / gap
    r_m = (alpha**2 - L**2 * c**2) / (-gap) / r_M
    return r_m, r_M


def radial_bounds(h, L, params):
    """Pericenter and apocenter radii ``(r_m, r_M)``.

    At the circular boundary both equal ``r*``.
    """
    require_closed(h, L, params, allow_circular=True)
    return _bounds(h, L, params)


def r_star(h, L, params):
    """Critical radius of ``phi_{h,L}``: its unique maximiser in the closed-orbit regime."""
    c, alpha = params.c, params.alpha
    if alpha * h == 0:
        raise RegimeError("r* undefined for h = 0", condition="alpha h != 0",
                          values={"h": h, "L": L})
    value = (alpha**2 - L**2 * c**2) / (-alpha * h)
    if not value > 0:
        raise RegimeError(f"r* = {value!r} is not positive",
                          condition="(alpha^2 - L^2 c^2)/(-alpha h) > 0",
                          values={"h": h, "L": L, "r_star": value})
    return value


def period_radial(h, params):
    """Minimal period of ``r(t)``; depends on the energy only."""
    if not 0 < h < params.rest_energy:
        raise DomainError(f"radial period needs 0 < h < m c^2, got h={h!r}")
    m, c, alpha = params.m, params.c, params.alpha
    return TWO_PI * alpha * m**2 * c**3 / _gap(params, h) ** 1.5


_GL_ORDER = 64
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)


def period_radial_quadrature(h, L, params):
    """Radial period by quadrature of ``dr / rdot`` between the apsides.

    Uses ``u = r_m + (r_M - r_m) sin(psi)**2``, which cancels both inverse
    square-root endpoint singularities, followed by Gauss-Legendre on
    ``[0, pi/2]``.
    """
    require_closed(h, L, params)
    c, alpha = params.c, params.alpha
    r_m, r_M = _bounds(h, L, params)
    psi = 0.25 * math.pi * (_GL_NODES + 1.0)
    s, co = np.sin(psi), np.cos(psi)
    u = r_m + (r_M - r_m) * s**2
    du = 2.0 * (r_M - r_m) * s * co
    # quadratic under the root in factored form: (h^2 - m^2c^4)(u - r_m)(u - r_M)
    quad = _gap(params, h) * (u - r_m) * (r_M - u)
    integrand = (alpha + h * u) / np.sqrt(quad) * du
    return (2.0 / c) * 0.25 * math.pi * float(_GL_WEIGHTS @ integrand)


def apsidal_factor(L, params):
    """``sqrt(1 - alpha^2 / (c^2 L^2))``, the ratio ``2 pi / Delta theta``."""
    a2 = (params.alpha / (params.c * L)) ** 2 if L != 0 else math.inf
    if not a2 < 1.0:
        raise DomainError(f"apsidal angle needs L^2 > alpha^2/c^2, got L={L!r}")
    return math.sqrt(1.0 - a2)


def apsidal_angle(L, params):
    """Angle swept by theta over one radial period."""
    return TWO_PI / apsidal_factor(L, params)


def commensurable_L(n, k, params):
    """Positive ``L`` with ``sqrt(1 - alpha^2/(c^2 L^2)) = n/k``."""
    n, k = int(n), int(k)
    if not 1 <= n < k:
        raise DomainError(f"need 1 <= n < k, got n={n}, k={k}")
    if math.gcd(n, k) != 1:
        raise DomainError(f"n and k must be coprime, gcd({n}, {k}) = {math.gcd(n, k)}")
    return params.alpha / params.c * math.sqrt(k * k / (k * k - n * n))


def rho_coefficients(h, L, params):
    """``(A, B)`` with ``1/rho = A cos(nu (theta - theta0)) + B``."""
    require_closed(h, L, params, allow_circular=True)
    m, c, alpha = params.m, params.c, params.alpha
    w = c**2 * L**2 - alpha**2
    disc = alpha**2 * m**2 * c**4 - _gap(params, h) * c**2 * L**2
    return math.sqrt(max(disc, 0.0)) / w, alpha * h / w


def polar_orbit_rho(theta, h, L, theta0=0.0, params=None):
    """Radius on the orbit as a function of the polar angle; vectorised over theta.

    ``theta0`` is the pericenter angle.
    """
    params = params or PhysParams()
    A, B = rho_coefficients(h, L, params)
    nu = apsidal_factor(L, params)
    out = 1.0 / (A * np.cos(nu * (np.asarray(theta, dtype=float) - theta0)) + B)
    return float(out) if out.ndim == 0 else out


def quasi_periodic_factor(h, L, params):
    """``(T_h, omega)`` with ``theta(t) - omega t`` periodic of period ``T_h``."""
    require_closed(h, L, params)
    Th = period_radial(h, params)
    return Th, TWO_PI / (Th * apsidal_factor(L, params))


# ---------------------------------------------------------------------------
# Resonant tori of period T


def t_star(n, params):
    """Smallest admissible period ``2 pi n alpha / (m c^3)`` for n radial turns."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    return TWO_PI * n * params.alpha / (params.m * params.c**3)


def h_for_period(T, n, params):
    """Energy whose radial period is ``T / n``."""
    Tn = t_star(n, params)
    if not T > Tn:
        raise HypothesisError(f"T = {T!r} must exceed T*_{n} = {Tn!r}",
                              condition="T > T*_n = 2 pi n alpha/(m c^3)",
                              values={"T": T, "n": n, "T_star": Tn})
    m, c, alpha = params.m, params.c, params.alpha
    gap = (TWO_PI * alpha * m**2 * c**3 * n / T) ** (2.0 / 3.0)
    return math.sqrt(m**2 * c**4 - gap)


def k_star(T, n, params):
    """Smallest integer strictly larger than ``m c^2 n / h_{T,n}``."""
    h = h_for_period(T, n, params)
    return math.floor(params.rest_energy * n / h) + 1


@dataclass(frozen=True)
class TorusLabel:
    """Unperturbed invariant torus filled by T-periodic orbits with winding ``sign*k``."""

    T: float
    n: int
    k: int
    sign: int
    h: float
    L: float
    r_star: float
    k_star: int

    def to_dict(self):
        return {"T": self.T, "n": self.n, "k": self.k, "sign": self.sign, "h": self.h,
                "L": self.L, "r_star": self.r_star, "k_star": self.k_star}


def make_torus(T, n, k, sign, params):
    if sign not in (1, -1):
        raise HypothesisError(f"sign must be +1 or -1, got {sign!r}", condition="sign = +-1",
                              values={"sign": sign})
    n, k = int(n), int(k)
    h = h_for_period(T, n, params)
    ks = math.floor(params.rest_energy * n / h) + 1
    if math.gcd(n, k) != 1:
        raise HypothesisError(f"gcd(n, k) = {math.gcd(n, k)} != 1", condition="gcd(n, k) = 1",
                              values={"n": n, "k": k})
    if k < ks:
        raise HypothesisError(f"k = {k} < k*_(T,n) = {ks}", condition="k >= k*_{T,n}",
                              values={"T": T, "n": n, "k": k, "k_star": ks, "h": h})
    alpha = params.alpha
    L_abs = commensurable_L(n, k, params)
    rs = alpha * n**2 / (h * k**2) / (1.0 - n**2 / k**2)
    if classify(h, L_abs, params).tag != CLOSED_NON_CIRCULAR:
        raise HypothesisError("(h_{T,n}, L_{n,k}) outside the closed-orbit regime",
                              condition="0<h<mc^2, alpha^2/c^2 < L^2 < alpha^2 m^2 c^2/(m^2c^4-h^2)",
                              values={"h": h, "L": L_abs})
    rs_check = r_star(h, L_abs, params)
    if not math.isclose(rs, rs_check, rel_tol=1e-12):
        raise HypothesisError("inconsistent apsidal marker", condition="r*_{T,n,k} = r*(h, L)",
                              values={"r_star": rs, "r_star_check": rs_check})
    if not math.isclose(n * period_radial(h, params), T, rel_tol=1e-10):
        raise HypothesisError("n T_h != T", condition="n T_h = T", values={"h": h, "T": T})
    return TorusLabel(float(T), n, k, int(sign), h, sign * L_abs, rs, ks)
