import math

import pytest
from hypothesis import HealthCheck, settings

from relkepler import PerturbationSpec, PhysParams
from relkepler.periodic import SearchConfig, find_periodic

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Pinned shooting scenario: dipole-cos with amplitude 1 around the (20 pi, 1, 2) torus.
PINNED_T = 20 * math.pi
PINNED_EPS = 1e-3

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def unit():
    return PhysParams()


@pytest.fixture(scope="session")
def dipole():
    return PerturbationSpec("dipole-cos", amplitude=1.0, period=PINNED_T)


_search_cache = {}


def pinned_search(sign, eps=PINNED_EPS, n_grid=12):
    key = (sign, eps, n_grid)
    if key not in _search_cache:
        pert = PerturbationSpec("dipole-cos", amplitude=1.0, period=PINNED_T)
        _search_cache[key] = find_periodic(PINNED_T, 1, 2, sign, eps, pert, PhysParams(),
                                           SearchConfig(n_omega=n_grid, n_tau=n_grid))
    return _search_cache[key]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
