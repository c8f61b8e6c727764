"""
Periodic solutions born from a resonant torus.

Take T = 20 pi and the (n, k) = (1, 2) torus: the unperturbed orbits with
this energy and angular momentum all close after time T while winding twice
around the origin. They form a two parameter family (rotation angle and time
shift). A time periodic dipole perturbation eps cos(2 pi t / T) x1 / r
breaks the family; only a few isolated T-periodic orbits survive.

We shoot from a 12 x 12 grid of points on the torus for both orientations,
print the distinct certified solutions, and continue one of them in eps
to watch the distance to the torus shrink linearly.

Takes about a minute on one core.
"""

import math
import time

from relkepler import PerturbationSpec, PhysParams, SearchConfig, continue_in_eps, find_periodic

T = 20 * math.pi
EPS = 1e-3
params = PhysParams()
pert = PerturbationSpec("dipole-cos", amplitude=1.0, period=T)

results = {}
for sign in (1, -1):
    t0 = time.time()
    res = find_periodic(T, 1, 2, sign, EPS, pert, params, SearchConfig(n_omega=12, n_tau=12))
    results[sign] = res
    print(f"sign {sign:+d}: {res.seeds_tried} seeds, {res.converged} converged, "
          f"{len(res)} distinct solutions ({time.time() - t0:.0f} s)")
    for s in res:
        x1, x2, p1, p2 = s.z0
        print(f"   z0 = ({x1:+.5f}, {x2:+.5f}, {p1:+.5f}, {p2:+.5f})  residual {s.residual:.1e}"
              f"  winding {s.winding:+d}  crossings {s.crossings}  closeness {s.closeness:.4f}")
    print()

print("the two orientations are mirror images of each other under x2 -> -x2\n")
print("continuation of the first +1 solution in eps")
branch = continue_in_eps(results[1][0], [1e-5, 1e-4, 1e-3, 3e-3, 1e-2, 3e-2], pert, params)
for e, s in zip(branch.eps_values, branch.solutions):
    print(f"   eps = {e:.0e}   closeness {s.closeness:.3e}   closeness / eps {s.closeness / e:.2f}")
if branch.failure:
    print(f"   stopped after eps = {branch.last_eps:g}: {branch.failure}")

res = results[1]
res.to_json("periodic_search.json")
print("\nwrote periodic_search.json")
