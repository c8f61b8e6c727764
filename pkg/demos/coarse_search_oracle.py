"""
Dense seed scan around the (T, n, k) = (20 pi, 1, 2) resonant torus.

Every point of an N x N grid of phases (omega, tau) is used as a shooting
seed for the dipole-cos perturbation, and the distinct Newton limits are
recorded. The pinned eps of the acceptance test is chosen from this scan:
the count of distinct limits per winding sign should be at least three.

Usage: coarse_search_oracle.py [N [EPS]], default N = 24 and EPS = 1e-3.
About two minutes per sign at N = 24 on one core; the cost grows like N^2.
"""

import math
import sys
import time

import numpy as np

from relkepler import PerturbationSpec, PhysParams, make_torus
from relkepler.errors import NearCollisionError
from relkepler.periodic import SeedGrid, newton_shoot, seed_states

N = int(sys.argv[1]) if len(sys.argv) > 1 else 24
EPS = float(sys.argv[2]) if len(sys.argv) > 2 else 1e-3
T = 20 * math.pi
params = PhysParams()
pert = PerturbationSpec("dipole-cos", amplitude=1.0, period=T)

for sign in (1, -1):
    torus = make_torus(T, 1, 2, sign, params)
    seeds = seed_states(SeedGrid(torus, N, N), params)
    limits = []
    t0 = time.time()
    for z in seeds:
        try:
            shot = newton_shoot(z, T, EPS, pert, params)
        except NearCollisionError:
            continue
        if shot.converged and all(np.max(np.abs(shot.z0 - y)) >= 1e-5 for y in limits):
            limits.append(shot.z0)
    print(f"sign {sign:+d}: {len(seeds)} seeds, {len(limits)} distinct limits "
          f"({time.time() - t0:.0f} s)")
    for z in sorted(limits, key=tuple):
        print("   ", np.array2string(z, precision=6, floatmode="fixed"))
