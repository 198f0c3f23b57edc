import numpy as np
import pytest

from rdslab.netgen import Network

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def path3() -> Network:
    return Network.from_edges(3, 1, [(0, 1), (1, 2)])


def k4() -> Network:
    return Network.from_edges(4, 2, [(a, b) for a in range(4) for b in range(a + 1, 4)])


def star(leaves: int = 3, n_infected: int = 1) -> Network:
    return Network.from_edges(leaves + 1, n_infected, [(0, i) for i in range(1, leaves + 1)])


def eight_node() -> Network:
    # Connected, has triangles; infected nodes 0..3 have degrees (2, 3, 2, 3),
    # uninfected 4..7 have (3, 2, 3, 2), so trait is independent of degree.
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 0),
             (1, 3), (4, 6)]
    return Network.from_edges(8, 4, edges)
