from pathlib import Path

import numpy as np
import pytest

from fastforest.data import Attribute, Dataset, load_dataset
from fastforest.tree import warmup

DATA = Path(__file__).resolve().parents[1] / "data"


@pytest.fixture(scope="session", autouse=True)
def _compiled():
    warmup()


@pytest.fixture
def mortgage():
    return load_dataset(DATA / "mortgage.arff")


@pytest.fixture(scope="session")
def segment():
    return load_dataset(DATA / "segment.arff")


@pytest.fixture(scope="session")
def tictactoe():
    return load_dataset(DATA / "tic-tac-toe.arff")


def make_dataset(X, y, categorical=None, n_classes=None, name="synthetic"):
    """Dataset from a float matrix and int labels; ``categorical`` maps column -> value count."""
    X = np.asarray(X, dtype=np.float64)
    categorical = categorical or {}
    n_classes = n_classes or int(np.max(y)) + 1
    attrs = []
    for j in range(X.shape[1]):
        nv = categorical.get(j)
        attrs.append(Attribute(f"a{j}", j, None if nv is None else tuple(f"v{i}" for i in range(nv))))
    attrs.append(Attribute("class", X.shape[1], tuple(f"c{i}" for i in range(n_classes))))
    values = np.column_stack([X, np.asarray(y, dtype=np.float64)])
    return Dataset(tuple(attrs), X.shape[1], values, name)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
