import numpy as np
import pytest

from ardnet.model import ArdDataset, PriorConfig, validate_dataset
from ardnet.simlab import ExperimentConfig, simulate_dgp


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="also run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="slow; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def small_truth():
    """A small simulated village used across modules."""
    cfg = ExperimentConfig(n=60, K=6, psi=0.5, seed=11)
    return cfg, simulate_dgp(cfg, cfg.rep_rng(0))


@pytest.fixture
def tiny_data():
    y = np.array([[2, 0, 1, 3], [0, 1, 0, 2], [1, 1, 1, 0], [4, 0, 0, 1]])
    traits = np.zeros((6, 4), dtype=int)
    traits[[0, 2, 4], 0] = 1
    traits[[1, 3], 1] = 1
    traits[[0, 5], 2] = 1
    traits[[2, 3, 5], 3] = 1
    dist = np.array([[0.5, 1.0, 2.0, 0.1], [1.5, 0.2, 0.3, 0.9]])
    return validate_dataset(ArdDataset(y=y, n=6, ard_index=np.arange(4),
                                       census_traits=traits, covariate_distance=dist))


@pytest.fixture
def short_priors():
    return PriorConfig(T=40, thin=2, n_graph_draws=3)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per criterion; printed again in the terminal summary."""
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
