"""
Closed orbits of the unperturbed problem.

With m = c = alpha = 1 we first classify the level (h, L) = (0.7, 1.2): the
orbit is a precessing rosette between the two apsidal radii. Then for h = 0.7
we pick the six angular momenta that make the apsidal angle a rational
multiple 2 pi k / n of a full turn. Each of these orbits closes after n
radial periods, winds k times around the origin and crosses the circle
r = r* exactly 2n times.

The closed-form polar curve rho(theta) = 1 / (A cos(theta/nu) + B) is compared
with the integrated trajectory. If matplotlib is installed the six curves
are drawn to orbit_shapes.png.
"""

import math

import numpy as np

from relkepler import PhysParams, classify, integrate, polar_orbit_rho, to_cartesian
from relkepler import unperturbed as ua
from relkepler.integrator import count_crossings, winding_number

params = PhysParams()

oc = classify(0.7, 1.2, params)
print(f"(h, L) = (0.7, 1.2): {oc.tag}")
print(f"  r* = {oc.r_star:.6f}, r_m = {oc.r_min:.5f}, r_M = {oc.r_max:.5f}")
print(f"  apsidal angle / 2 pi = {ua.apsidal_angle(1.2, params) / (2 * math.pi):.6f}")
print()

h = 0.7
Th = ua.period_radial(h, params)
curves = {}
print(" n  k        L        A         B        r*   crossings  winding  sup gap")
for n, k in [(1, 2), (1, 3), (2, 3), (2, 5), (3, 5), (5, 8)]:
    L = ua.commensurable_L(n, k, params)
    A, B = ua.rho_coefficients(h, L, params)
    rs = ua.r_star(h, L, params)
    r_m, _ = ua.radial_bounds(h, L, params)
    traj = integrate(to_cartesian((r_m, 0.0, 0.0, L)).z, 0.0, n * Th, params)
    cr = count_crossings(traj, rs)
    w, _ = winding_number(traj)
    # compare with the closed form along the integrated angle
    gap = np.max(np.abs(traj.radius - polar_orbit_rho(traj.theta, h, L, params=params)))
    print(f"{n:2d} {k:2d}  {L:.6f}  {A:.6f}  {B:.5f}  {rs:.6f}  {cr.count:5d}  {w:7d}  {gap:.1e}")
    curves[(n, k)] = (traj, rs)

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, axes = plt.subplots(2, 3, figsize=(10, 7))
    s = np.linspace(0, 2 * math.pi, 400)
    for ax, ((n, k), (traj, rs)) in zip(axes.flat, curves.items()):
        ax.plot(traj.states[:, 0], traj.states[:, 1], lw=0.8)
        ax.plot(rs * np.cos(s), rs * np.sin(s), "k--", lw=0.6)
        ax.set_title(f"(n, k) = ({n}, {k})")
        ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig("orbit_shapes.png", dpi=120)
    print("\nwrote orbit_shapes.png")
