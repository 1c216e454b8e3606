import contextlib

import numpy as np
import pytest

from apdtree import Dataset

_ACCEPTANCE = []


@pytest.fixture
def rng():
    return np.random.default_rng(20120626)


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion for the summary."""

    @contextlib.contextmanager
    def record(label):
        info = {"detail": ""}
        try:
            yield info
        except pytest.skip.Exception:
            _ACCEPTANCE.append(("SKIP", label, info["detail"]))
            raise
        except BaseException:
            _ACCEPTANCE.append(("FAIL", label, info["detail"]))
            raise
        _ACCEPTANCE.append(("PASS", label, info["detail"]))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for status, label, detail in _ACCEPTANCE:
        line = f"{status:4s}  {label}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


def random_dataset(rng, n, dim, scale=1.0):
    return Dataset(rng.normal(size=(n, dim)) * scale)


def two_point(a=(0.0, 0.0), b=(2.0, 0.0)):
    return Dataset(np.array([a, b], dtype=float))


def spike_dataset():
    """99 points at the origin and one at (100, 0)."""
    X = np.zeros((100, 2))
    X[99, 0] = 100.0
    return Dataset(X)
