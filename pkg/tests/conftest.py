import time

import numpy as np
import pytest

from delaybif.model import REFERENCE

# wall-clock seconds spent building the shared fixtures
TIMINGS = {}


@pytest.fixture(scope="session")
def ref():
    return REFERENCE


@pytest.fixture(scope="session")
def first_branch():
    """Cycles born at the first Hopf delay of the reference parameters."""
    from delaybif.analytic import hopf_table
    from delaybif.periodic.branch import continue_branch, hopf_seed

    t0 = time.perf_counter()
    hp = hopf_table(REFERENCE).family(1)[0]
    br = continue_branch(hopf_seed(REFERENCE, hp), (0.0, 6.0))
    TIMINGS["first_branch"] = time.perf_counter() - t0
    return br


@pytest.fixture(scope="session")
def doubled_branch(first_branch):
    from delaybif.periodic.branch import continue_branch, period_doubling_seed
    from delaybif.periodic.events import EventKind

    t0 = time.perf_counter()
    pd = [e for e in first_branch.events if e.kind is EventKind.PERIOD_DOUBLING][0]
    br = continue_branch(period_doubling_seed(pd.orbit), (3.0, 6.0))
    TIMINGS["doubled_branch"] = time.perf_counter() - t0
    return br


@pytest.fixture(scope="session")
def second_family_branch():
    """Cycles born at the first second-family Hopf delay."""
    from delaybif.analytic import hopf_table
    from delaybif.periodic.branch import continue_branch, hopf_seed

    t0 = time.perf_counter()
    hp = hopf_table(REFERENCE).family(2)[0]
    br = continue_branch(hopf_seed(REFERENCE, hp), (0.0, 8.0))
    TIMINGS["second_family_branch"] = time.perf_counter() - t0
    return br


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cascade_run():
    """Period-doubling cascade on the branch from the second first-family Hopf delay."""
    from delaybif.periodic.cascade import cascade_scan

    branches = []
    t0 = time.perf_counter()
    steps = cascade_scan(REFERENCE, (5.0, 12.22), 6, branches=branches)
    return steps, branches, time.perf_counter() - t0
