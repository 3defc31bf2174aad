import numpy as np
import pytest

from graph_ews import logger
from graph_ews.evodyn import GameMatrix, SimParams
from graph_ews.netgen import NetworkKind, NetworkSpec, complete_graph, cycle_graph


@pytest.fixture(autouse=True)
def quiet_logger(tmp_path):
    with logger.scoped_configure(dir=str(tmp_path / "logs"), format_strs=[]):
        yield


@pytest.fixture
def k3():
    return complete_graph(3)


@pytest.fixture
def c4():
    return cycle_graph(4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_params():
    def _make(w=0.1, eta=0.1, n=100, kind=NetworkKind.SMALL_WORLD, degree=4, **kwargs):
        return SimParams(
            game=GameMatrix(),
            w=w,
            eta=eta,
            network=NetworkSpec(kind=kind, n=n, degree_param=degree, seed=kwargs.pop("net_seed", 0)),
            **kwargs,
        )

    return _make
