import os
from pathlib import Path

import numpy as np
import pytest

from topoclasp.graphs import Graph

REPO = Path(__file__).resolve().parents[1]


def _dataset_root():
    return Path(os.environ.get("TOPOCLASP_DATA", REPO / "data"))


@pytest.fixture(scope="session")
def data_root():
    return _dataset_root()


@pytest.fixture(scope="session")
def mutag_dir():
    path = _dataset_root() / "MUTAG"
    if not (path / "MUTAG_A.txt").is_file():
        pytest.skip("MUTAG not available")
    return path


def path_graph(n, features=None):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)], features)


def cycle_graph(n, features=None):
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], features)


def complete_graph(n, features=None):
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)], features)


@pytest.fixture
def toy_tu_dir(tmp_path):
    """Two graphs: a labelled path on 3 nodes and a single edge."""
    d = tmp_path / "TOY"
    d.mkdir()
    (d / "TOY_A.txt").write_text("1, 2\n2, 1\n2, 3\n3, 2\n4, 5\n5, 4\n")
    (d / "TOY_graph_indicator.txt").write_text("1\n1\n1\n2\n2\n")
    (d / "TOY_graph_labels.txt").write_text("-1\n1\n")
    (d / "TOY_node_labels.txt").write_text("0\n2\n0\n2\n2\n")
    return d


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Criterion number -> one-line verdict, echoed in the terminal summary."""
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
