"""Relativistic Kepler problem with a time-periodic perturbation.

Unperturbed orbit analysis, action variables of the integrable problem, an
adaptive integrator with variational equations, and a shooting search for
periodic solutions that bifurcate from resonant invariant tori.
"""

from .action_angle import (Actions, K0, actions_from, det_hess_K0, grad_K0, hess_K0,
                           hL_from_actions, nonrel_limits, resonance_vector, torus_actions)
from .dynamics import (CartesianState, PerturbationSpec, PhysParams, PolarState,
                       angular_momentum, hamiltonian_h0, rotate_state, reflect_state,
                       to_cartesian, to_polar, vector_field)
from .errors import (DomainError, HypothesisError, IntegrationError, NearCollisionError,
                     RegimeError, RelKeplerError, StiffnessError, WindingError)
from .integrator import (IntegratorConfig, Trajectory, count_crossings, flow_map,
                         flow_with_tangent, integrate, return_time, winding_number)
from .periodic import (PeriodicSolution, SearchConfig, SeedGrid, closeness_to_torus,
                       continue_in_eps, deduplicate, find_periodic, newton_shoot, seed_states)
from .unperturbed import (TorusLabel, apsidal_angle, classify, make_torus, period_radial,
                          polar_orbit_rho, r_star, radial_bounds)

__version__ = "0.1.0"
