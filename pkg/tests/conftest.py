import numpy as np
import pytest

from edict.ingest.normalize import split_stratified, znormalize
from edict.ingest.synthetic import generate_synthetic
from edict.model.dynamics import EdictModel, ModelDims

from helpers import make_series

SMALL_DIMS = ModelDims(n_features=3, hidden=6, encoder=4, head=5, ode_step=0.05)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow end-to-end acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_model():
    return EdictModel.initialize(SMALL_DIMS, seed=0, requires_grad=False)


@pytest.fixture
def trainable_model():
    return EdictModel.initialize(SMALL_DIMS, seed=1)


@pytest.fixture
def toy_series():
    return make_series(
        "toy",
        [0.05, 0.3, 0.55, 0.9],
        [[0.4, 0.0, -1.0], [0.0, 1.2, 0.0], [0.3, -0.2, 0.8], [0.0, 0.0, 1.5]],
        [[True, False, True], [False, True, False], [True, True, True], [False, False, True]],
    )


@pytest.fixture
def toy_batch(toy_series):
    rng = np.random.default_rng(7)
    other = make_series(
        "other",
        [0.1, 0.3, 0.72],
        rng.normal(size=(3, 3)),
        [[True, True, False], [True, False, False], [False, True, True]],
    )
    third = make_series("third", [0.62], [[0.0, 2.0, 0.0]], [[False, True, False]])
    return [toy_series, other, third]


@pytest.fixture(scope="session")
def synthetic_splits():
    """Normalized (train, val, test) splits of a small synthetic dataset."""
    data = generate_synthetic(60, seed=3)
    train, val, test = split_stratified(data, seed=3)
    (train, val, test), stats = znormalize(train, val, test)
    return train, val, test, stats
