import numpy as np
import pytest

from chainspec.epsgraph import GraphLadder, RefinementSchedule, schedule_for
from chainspec.systems import make_system, sample


@pytest.fixture(autouse=True)
def chainspec_home(tmp_path, monkeypatch):
    """Keep logs and the run database out of the real home directory."""
    home = tmp_path / "home"
    monkeypatch.setenv("CHAINSPEC_HOME", str(home))
    monkeypatch.delenv("CHAINSPEC_THREADS", raising=False)
    return home


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def cascade():
    return make_system("cascade")


@pytest.fixture(scope="session")
def halving():
    return make_system("halving")


@pytest.fixture(scope="session")
def identity():
    return make_system("identity-interval")


@pytest.fixture(scope="session")
def two_identities():
    return make_system("identity-two-intervals")


@pytest.fixture(scope="session")
def golden():
    return make_system("rotation-golden")


@pytest.fixture(scope="session")
def eighth():
    return make_system("rotation-eighth")


@pytest.fixture(scope="session")
def cascade_grid(cascade):
    return sample(cascade, 0.01)


@pytest.fixture(scope="session")
def cascade_sched(cascade_grid):
    return schedule_for(cascade_grid, depth=10)


@pytest.fixture(scope="session")
def cascade_ladder(cascade_grid, cascade_sched):
    return GraphLadder(cascade_grid, cascade_sched)


@pytest.fixture(scope="session")
def halving_grid(halving):
    return sample(halving, 0.01)


@pytest.fixture
def small_sched():
    return RefinementSchedule.user([0.4, 0.2, 0.1, 0.05, 0.025])
