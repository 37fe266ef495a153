import time

import numpy as np
import pytest

from crossdiff.fastlimit import eps_sweep, reference_config, well_prepared_init
from crossdiff.model import PowerLawParams, build_power_law, identity_model
from crossdiff.stepper import SchemeParams, run

REFERENCE_EPS = 1e-2
SWEEP_EPS = (1e-1, 1e-2, 1e-3)


@pytest.fixture(scope="session")
def power_law():
    return build_power_law(PowerLawParams())


@pytest.fixture(scope="session")
def identity():
    return identity_model()


@pytest.fixture(scope="session")
def ref_config():
    return reference_config()


@pytest.fixture(scope="session")
def ref_run(ref_config):
    """The reference configuration at a single eps, with per-step monitors."""
    c = ref_config
    init = well_prepared_init(c.u2_init, c.u3_init, c.funcs, c.grid)
    p = SchemeParams(tau=c.scheme.tau, eta=0.0, eps=REFERENCE_EPS)
    return run(init, c.T_final, p, c.funcs, monitors=True)


@pytest.fixture(scope="session")
def ref_sweep(ref_config):
    t0 = time.perf_counter()
    result = eps_sweep(ref_config, SWEEP_EPS)
    result.elapsed = time.perf_counter() - t0
    return result


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
