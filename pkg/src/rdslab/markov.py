"""Random-walk kernel of a network and seed-dependence diagnostics."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rdslab.netgen import Network


class ZeroDegreeGraph(ValueError):
    pass


class WalkStuck(RuntimeError):
    pass


# Probability breakpoints written next to heatmap matrices; colour assignment
# is left to whatever plotting tool reads them.
HEATMAP_BINS = (0.0, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic kernel; rows of isolated nodes are all zero and flagged."""

    entries: np.ndarray
    isolated: np.ndarray

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def has_isolated(self) -> bool:
        return bool(self.isolated.any())

    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    probs: np.ndarray
    alpha: float  # probs = alpha * degree


def transition_matrix(net: Network) -> TransitionMatrix:
    if net.n_nodes == 0:
        raise ValueError("empty network")
    a = net.adjacency().astype(float)
    d = net.degree.astype(float)
    isolated = d == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(isolated[:, None], 0.0, a / d[:, None])
    return TransitionMatrix(t, isolated)


def n_step(tm: TransitionMatrix, k: int) -> TransitionMatrix:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return TransitionMatrix(np.linalg.matrix_power(tm.entries, k), tm.isolated)


def n_step_series(tm: TransitionMatrix, k: int) -> list[np.ndarray]:
    """T^1 .. T^k by iterated multiplication."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    out = [tm.entries.copy()]
    for _ in range(k - 1):
        out.append(out[-1] @ tm.entries)
    return out


def stationary(net: Network) -> StationaryDistribution:
    d = net.degree.astype(float)
    total = d.sum()
    if total == 0:
        raise ZeroDegreeGraph("graph has no edges")
    return StationaryDistribution(d / total, 1.0 / total)


def column_spread(m: np.ndarray) -> float:
    """Largest column range max_i m[i, j] - min_i m[i, j]; zero means seed-independent."""
    return float((m.max(axis=0) - m.min(axis=0)).max())


def mixing_diagnostic(tm: TransitionMatrix, k: int) -> np.ndarray:
    """Column-homogeneity score of T^s for s = 1..k (index s-1)."""
    return np.array([column_spread(m) for m in n_step_series(tm, k)])


def simulate_walk(net: Network, start: int, steps: int, rng: np.random.Generator) -> list[int]:
    nbrs = net.neighbors
    if not nbrs[start]:
        raise WalkStuck(f"start node {start} has degree 0")
    path = [start]
    cur = start
    for _ in range(steps):
        alters = nbrs[cur]
        if not alters:
            raise WalkStuck(f"walk reached isolated node {cur}")
        cur = alters[int(rng.integers(len(alters)))]
        path.append(cur)
    return path


def two_clique_graph(bridges: int = 1, size: int = 5) -> Network:
    """Two `size`-cliques joined by `bridges` cross edges i -- size+i.

    With one bridge this is the strongly clustered 10-node demo graph; with
    five it is the weakly clustered counterpart.
    """
    pairs = [(a, b) for off in (0, size) for a in range(off, off + size) for b in range(a + 1, off + size)]
    pairs += [(i, size + i) for i in range(bridges)]
    return Network.from_edges(2 * size, size, pairs)


def write_matrix_csv(m: np.ndarray, path: str | Path) -> None:
    rows = [",".join(repr(float(x)) for x in row) for row in m]
    Path(path).write_text("\n".join(rows) + "\n")


def read_matrix_csv(path: str | Path) -> np.ndarray:
    return np.array(
        [[float(x) for x in line.split(",")] for line in Path(path).read_text().splitlines() if line]
    )


def write_heatmap_bins(path: str | Path, bins=HEATMAP_BINS) -> None:
    lines = ["bin,lower,upper"]
    lines += [f"{i},{lo!r},{hi!r}" for i, (lo, hi) in enumerate(zip(bins[:-1], bins[1:]))]
    Path(path).write_text("\n".join(lines) + "\n")
