import numpy as np
import pytest

from gphdm.data import Dataset, TaxonomyGraph, synthesize
from gphdm.model import ModelConfig, initialize
from gphdm.optim import MinimizeConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tree():
    return TaxonomyGraph.binary_tree(3)


@pytest.fixture(scope="session")
def small_tree():
    return TaxonomyGraph.binary_tree(2)


@pytest.fixture(scope="session")
def small_data(small_tree):
    # 2 leaves x 2 repetitions x 12 points = 48 points, 4 outputs
    return synthesize(small_tree, trajectories_per_leaf=2, points=12, output_dim=4, seed=3)


def _trained(data, graph, name, iters=300, **kw):
    model = initialize(data, graph, ModelConfig.for_model(name, **kw))
    model.train(MinimizeConfig(max_iters=iters, grad_tol=1e-6, patience=100))
    return model


@pytest.fixture(scope="session")
def small_gphdm(small_data, small_tree):
    return _trained(small_data, small_tree, "gphdm")


@pytest.fixture(scope="session")
def small_gpdm(small_data, small_tree):
    return _trained(small_data, small_tree, "gpdm")


@pytest.fixture(scope="session")
def small_gphlvm(small_data, small_tree):
    return _trained(small_data, small_tree, "gphlvm")


@pytest.fixture(scope="session")
def chain_graph():
    return TaxonomyGraph(["s", "g"], [("s", "g")], root="s")


def single_chain(n=8, dy=3, seed=0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, n)[:, None]
    y = np.hstack([np.sin(2 * t + k) for k in range(dy)]) + 0.01 * rng.standard_normal((n, dy))
    return Dataset([y], ["s"], ["g"]).centered()


# acceptance criteria record their verdicts here; printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
