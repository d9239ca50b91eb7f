import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_sweep():
    """The 4-method x 10-seed sweep on the calibrated dataset, shared by the statistical tests."""
    import time

    from atomize.data import default_dataset
    from atomize.losses import METHODS
    from atomize.trainer import TrainConfig, sweep

    ds = default_dataset(0)
    started = time.perf_counter()
    results = sweep(METHODS, range(10), ds, TrainConfig())
    elapsed = time.perf_counter() - started
    return {"dataset": ds, "results": {r.method: r for r in results}, "elapsed": elapsed}


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
