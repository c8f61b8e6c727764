"""
Action variables of the integrable problem and the twist condition.

The actions are I1 = L + (area enclosed by the radial loop) / 2 pi and
I2 = |L|. The energy K0(I1, I2) is explicit, its gradient gives the radial
and precession frequencies, and its Hessian has positive determinant
everywhere in the closed-orbit region. That twist is what lets the
resonant tori split into isolated periodic solutions under perturbation.

The second half lets c grow with the Newtonian energy fixed: the apsidal
angle approaches 2 pi like 1/c^2 and the radial period approaches the
Kepler value.
"""

import math

import numpy as np

from relkepler import PhysParams, actions_from, det_hess_K0, grad_K0, make_torus
from relkepler import action_angle as aa
from relkepler import unperturbed as ua

params = PhysParams()

I = actions_from(0.7, 1.2, params)
print(f"(h, L) = (0.7, 1.2)  ->  I = ({I.I1:.6f}, {I.I2:.6f})")
print(f"  K0(I) = {aa.K0(I, params):.12f}")
print(f"  grad K0 = {np.round(grad_K0(I, params), 6)}")
print(f"  det Hess K0 = {det_hess_K0(I, params):.6f}")
print()

# resonant tori: T grad K0 / 2 pi is the integer vector (n, k - n)
print("     T   n  k   T grad K0 / 2 pi")
for T, n, k in [(20 * math.pi, 1, 2), (20 * math.pi, 1, 3), (60.0, 2, 5), (90.0, 3, 7)]:
    It = aa.torus_actions(make_torus(T, n, k, 1, params), params)
    v = aa.resonance_vector(It, T, params)
    print(f"{T:7.3f}  {n}  {k}   ({v[0]:.10f}, {v[1]:.10f})")
print()

rng = np.random.default_rng(0)
dets = []
for _ in range(2000):
    h = rng.uniform(0.02, 0.98)
    lo, hi = ua.lower_L2(params), ua.upper_L2(h, params)
    L = math.sqrt(lo + rng.uniform(0.01, 0.99) * (hi - lo))
    dets.append(det_hess_K0(actions_from(h, L, params), params))
print(f"twist: det Hess K0 over 2000 random levels lies in [{min(dets):.3e}, {max(dets):.3e}]")
print()

E, L = -0.3, 1.1
print("      c     apsidal angle - 2 pi     T_h / T_Kepler - 1")
for c in (10.0, 100.0, 1000.0):
    p = PhysParams(c=c)
    lim = aa.nonrel_limits(p.rest_energy + E, L, p)
    print(f"{c:7.0f}   {lim.delta_theta - 2 * math.pi:.6e}        "
          f"{lim.T_h / lim.T_kepler - 1:.3e}")
