"""Action variables and the Hamiltonian expressed in them.

``I1 = A(h, L) / (2 pi) + L`` where ``A`` is the area enclosed by the closed
curve ``l**2 = phi_{h,L}(r)`` in the ``(r, l)`` plane, and ``I2 = L``.
Formulas are evaluated at ``|L|``; negative angular momenta follow from the
reflection ``L -> -L, theta -> -theta``.

Writing ``S(I) = I1 - I2 + sqrt(c^2 I2^2 - alpha^2) / c`` and ``a = alpha/c``,
the Hamiltonian is ``K0 = m c^2 S / sqrt(S^2 + a^2)``, so every derivative is
``K0'(S)``, ``K0''(S)`` chained with the derivatives of ``S``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import unperturbed as ua
from .dynamics import TWO_PI
from .errors import DomainError


@dataclass(frozen=True)
class Actions:
    I1: float
    I2: float

    def as_array(self):
        return np.array([self.I1, self.I2])


def _check(I, params):
    I1, I2 = (I.I1, I.I2) if isinstance(I, Actions) else I
    if not I1 - I2 > 0:
        raise DomainError(f"need I1 - I2 > 0, got I1={I1!r}, I2={I2!r}")
    w = params.c**2 * I2**2 - params.alpha**2
    if not w > 0:
        raise DomainError(f"need c^2 I2^2 > alpha^2, got I2={I2!r}")
    return I1, I2, w


def enclosed_area(h, L, params):
    ua.require_closed(h, L, params)
    m, c, alpha = params.m, params.c, params.alpha
    gap = (params.rest_energy - h) * (params.rest_energy + h)
    return TWO_PI / c * (alpha * h / math.sqrt(gap) - math.sqrt(c**2 * L**2 - alpha**2))


def actions_from(h, L, params):
    L = abs(L)
    return Actions(enclosed_area(h, L, params) / TWO_PI + L, L)


def S_of(I, params):
    I1, I2, w = _check(I, params)
    return I1 - I2 + math.sqrt(w) / params.c


def K0(I, params):
    S = S_of(I, params)
    a2 = (params.alpha / params.c) ** 2
    return params.rest_energy * S / math.sqrt(S * S + a2)


def hL_from_actions(I, params):
    """Invert :func:`actions_from`; the energy is ``K0(I)``."""
    _, I2, _ = _check(I, params)
    return K0(I, params), I2


def is_valid_actions(I, params):
    """Membership in the action domain: the image lies in the closed-orbit regime."""
    try:
        h, L = hL_from_actions(I, params)
    except DomainError:
        return False
    return L > 0 and ua.is_closed(h, L, params)


def _S_derivs(I2, params):
    c, alpha = params.c, params.alpha
    w = c**2 * I2**2 - alpha**2
    dS2 = -1.0 + c * I2 / math.sqrt(w)
    d2S22 = -c * alpha**2 / w**1.5
    return dS2, d2S22


def _K_derivs(S, params):
    a2 = (params.alpha / params.c) ** 2
    q = S * S + a2
    mc2 = params.rest_energy
    return mc2 * a2 / q**1.5, -3.0 * mc2 * a2 * S / q**2.5


def grad_K0(I, params):
    """Frequencies ``(dK0/dI1, dK0/dI2)``."""
    I1, I2, _ = _check(I, params)
    S = S_of(I, params)
    dK, _ = _K_derivs(S, params)
    dS2, _ = _S_derivs(I2, params)
    return np.array([dK, dK * dS2])


def hess_K0(I, params):
    I1, I2, _ = _check(I, params)
    S = S_of(I, params)
    dK, d2K = _K_derivs(S, params)
    dS2, d2S22 = _S_derivs(I2, params)
    off = d2K * dS2
    return np.array([[d2K, off], [off, d2K * dS2 * dS2 + dK * d2S22]])


def det_hess_K0(I, params):
    """Closed-form determinant ``3 m^2 c alpha^6 S / ((S^2+a^2)^4 (c^2 I2^2 - alpha^2)^(3/2))``."""
    I1, I2, w = _check(I, params)
    S = S_of(I, params)
    a2 = (params.alpha / params.c) ** 2
    m, c, alpha = params.m, params.c, params.alpha
    return 3.0 * m**2 * c * alpha**6 * S / ((S * S + a2) ** 4 * w**1.5)


def resonance_vector(I, T, params):
    """``T grad K0(I) / (2 pi)``; integer entries ``(n, k - n)`` on a resonant torus."""
    return T * grad_K0(I, params) / TWO_PI


def torus_actions(torus, params):
    return actions_from(torus.h, abs(torus.L), params)


@dataclass(frozen=True)
class NonRelLimits:
    E: float  # h - m c^2
    L: float
    T_h: float
    T_kepler: float
    delta_theta: float
    rho_coeffs: tuple  # relativistic (A, B) of 1/rho
    ellipse_coeffs: tuple  # Keplerian (A, B) of 1/rho


def kepler_period(E, params):
    """Third-law period ``2 pi alpha sqrt(m) / (-2E)^(3/2)`` of a Kepler ellipse."""
    if not E < 0:
        raise DomainError(f"Kepler period needs E < 0, got {E!r}")
    return TWO_PI * params.alpha * math.sqrt(params.m) / (-2.0 * E) ** 1.5


def kepler_ellipse_coefficients(E, L, params):
    """``(A, B)`` with ``1/rho = A cos(theta - theta0) + B`` for the Kepler ellipse."""
    m, alpha = params.m, params.alpha
    return (math.sqrt(alpha**2 * m**2 + 2 * m * E * L**2) / L**2, alpha * m / L**2)


def nonrel_limits(h, L, params):
    """Relativistic quantities next to their Keplerian limits at the same ``E = h - mc^2``."""
    ua.require_closed(h, L, params)
    E = h - params.rest_energy
    return NonRelLimits(
        E=E, L=L,
        T_h=ua.period_radial(h, params),
        T_kepler=kepler_period(E, params),
        delta_theta=ua.apsidal_angle(L, params),
        rho_coeffs=ua.rho_coefficients(h, L, params),
        ellipse_coeffs=kepler_ellipse_coefficients(E, L, params),
    )
