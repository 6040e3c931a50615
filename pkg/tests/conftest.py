import numpy as np
import pytest

from durable_recourse.scorer import DatasetSpec, generate_dataset, train_score_model


@pytest.fixture(scope="session")
def dataset():
    return generate_dataset(DatasetSpec())


@pytest.fixture(scope="session")
def model(dataset):
    return train_score_model(dataset)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = {}
N_CRITERIA = 11


@pytest.fixture
def criterion():
    """Record one acceptance criterion's outcome, then assert it."""

    def record(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[n] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        terminalreporter.write_line(_CRITERIA.get(n, f"criterion {n:>2}: NOT RUN"))
