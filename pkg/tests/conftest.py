import json
import os

import numpy as np
import pytest

from hermite_stokes.operators import get_cache
from hermite_stokes.space import get_space

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

# PASS/FAIL lines from the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def space4():
    return get_space(4)


@pytest.fixture(scope="session")
def space6():
    return get_space(6)


@pytest.fixture(scope="session")
def space8():
    return get_space(8)


@pytest.fixture(scope="session")
def cache4(space4):
    return get_cache(space4)


@pytest.fixture(scope="session")
def cache6(space6):
    return get_cache(space6)


@pytest.fixture(scope="session")
def cache8(space8):
    return get_cache(space8)


@pytest.fixture(scope="session")
def anchors():
    with open(os.path.join(FIXTURES, "anchors.json")) as fh:
        return json.load(fh)


def rel(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def make_params(cache, gamma=0.5, nu=1.0, epsilon=0.25, mode="auto", samples=200, seed=0):
    """Threshold parameters at a target gamma, empirical c and the selected lambda_0."""
    from hermite_stokes.dissipativity import compute_thresholds, f_for_gamma, select_lambda0
    from hermite_stokes.estimates import EstimateContext, empirical_c
    from hermite_stokes.operators import delta_from_epsilon

    delta = delta_from_epsilon(epsilon)
    c, _ = empirical_c(EstimateContext(cache), epsilon, samples, seed)
    lam1 = cache.lambda1_B
    a = cache.a_constant(delta)
    lam0, n_sel, omega, info = select_lambda0(cache, delta, mode, 1, 1.0)
    f = f_for_gamma(gamma, nu, c, a, lam1, lam0, epsilon) if gamma else 0.0
    return compute_thresholds(nu, f, c, a, lam1, lam0, epsilon, omega, n_sel, info)


def convergence_orders(n_modes=8, levels=4, dt0=0.05, t_end=0.2, amplitude=0.5):
    """Observed orders of the default scheme from successive differences on a dt-halving ladder."""
    from hermite_stokes.dissipativity import ForceModel
    from hermite_stokes.evolution import SimConfig, evolve
    from hermite_stokes.field import random_field

    sp = get_space(n_modes)
    u0 = random_field(1, sp, decay_rate=2.0).coeffs
    u0 = u0 / sp.stokes_norm(u0, 1.0)
    finals = []
    for k in range(levels + 1):
        cfg = SimConfig(n_modes=n_modes, dt=dt0 / 2**k, t_end=t_end, diagnostics_every=10**6,
                        force=ForceModel("constant", amplitude))
        finals.append(evolve(cfg, u0=u0).final.coeffs)
    # successive differences: free of any reference-solution bias
    errs = [np.linalg.norm(finals[i] - finals[i + 1]) for i in range(levels)]
    return [float(np.log2(errs[i] / errs[i + 1])) for i in range(len(errs) - 1)], errs
