"""Two-block dyad-independent network populations.

A population is described by a handful of targets (size, prevalence, mean
degree, homophily ratios, relative activity). Those targets determine three
edge probabilities, one per unordered block pair, and graphs are drawn by
independent Bernoulli trials over all dyads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph


class InfeasibleTargets(ValueError):
    """Raised when population targets imply an edge probability outside (0, 1)."""


class NetworkFormatError(ValueError):
    pass


# Tolerance on the implied infected/uninfected degree ratio when both
# homophily ratios are given at unit activity.
_RATIO_TOL = 1e-9


@dataclass(frozen=True)
class PopulationConfig:
    n_nodes: int = 1000
    prevalence: float = 0.2
    mean_degree: float = 7.0
    homophily_ratio_ii: float = 5.0
    # None means "solve uninfected-uninfected probability from the activity
    # constraint", which is also what happens whenever activity_ratio != 1.
    homophily_ratio_uu: float | None = 2.0
    activity_ratio: float = 1.0

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError(f"n_nodes must be >= 2, got {self.n_nodes}")
        if not 0.0 <= self.prevalence <= 1.0:
            raise ValueError(f"prevalence must be in [0, 1], got {self.prevalence}")
        if self.mean_degree <= 0:
            raise ValueError("mean_degree must be positive")
        if self.homophily_ratio_ii <= 0:
            raise ValueError("homophily_ratio_ii must be positive")
        if self.homophily_ratio_uu is not None and self.homophily_ratio_uu <= 0:
            raise ValueError("homophily_ratio_uu must be positive")
        if self.activity_ratio <= 0:
            raise ValueError("activity_ratio must be positive")
        n_i = self.n_infected
        if n_i < 1 or self.n_nodes - n_i < 1:
            raise ValueError(
                f"prevalence {self.prevalence} with n_nodes {self.n_nodes} leaves an empty group"
            )

    @property
    def n_infected(self) -> int:
        return int(round(self.prevalence * self.n_nodes))

    @property
    def n_uninfected(self) -> int:
        return self.n_nodes - self.n_infected

    @property
    def true_prevalence(self) -> float:
        """Realized prevalence N_I / N, the ground truth used in all metrics."""
        return self.n_infected / self.n_nodes


@dataclass(frozen=True)
class DyadProbabilities:
    p_ii: float
    p_iu: float
    p_uu: float

    def __post_init__(self):
        for name in ("p_ii", "p_iu", "p_uu"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")

    def expected_degrees(self, n_infected: int, n_uninfected: int) -> tuple[float, float]:
        """Expected (infected, uninfected) degree, ignoring the self term."""
        d_i = n_infected * self.p_ii + n_uninfected * self.p_iu
        d_u = n_infected * self.p_iu + n_uninfected * self.p_uu
        return d_i, d_u


def solve_dyad_probabilities(config: PopulationConfig) -> DyadProbabilities:
    """Closed-form block probabilities hitting the configured degree targets.

    Expected group degrees use N-denominators::

        d_I = N_I * p_II + N_U * p_IU
        d_U = N_I * p_IU + N_U * p_UU

    with p_II = r_II * p_IU always. At unit activity with both ratios given,
    p_UU = r_UU * p_IU and the ratios must already equalize group degrees.
    Otherwise d_U = mean / (prev * w + 1 - prev), d_I = w * d_U and p_UU is
    solved from the uninfected degree equation.
    """
    n_i, n_u = config.n_infected, config.n_uninfected
    prev = n_i / config.n_nodes
    r_ii = config.homophily_ratio_ii
    w = config.activity_ratio

    if w == 1.0 and config.homophily_ratio_uu is not None:
        r_uu = config.homophily_ratio_uu
        unit_i = n_i * r_ii + n_u
        unit_u = n_i + n_u * r_uu
        p_iu = config.mean_degree / (prev * unit_i + (1 - prev) * unit_u)
        if abs(unit_i / unit_u - 1.0) > _RATIO_TOL:
            raise InfeasibleTargets(
                f"homophily ratios {r_ii}:{r_uu} give d_I/d_U = {unit_i / unit_u:.6g} "
                f"at prevalence {prev:.6g}, contradicting activity_ratio=1; "
                "set homophily_ratio_uu to null to solve it from the activity constraint"
            )
        probs = (r_ii * p_iu, p_iu, r_uu * p_iu)
    else:
        d_u = config.mean_degree / (prev * w + 1 - prev)
        d_i = w * d_u
        p_iu = d_i / (n_i * r_ii + n_u)
        p_uu = (d_u - n_i * p_iu) / n_u
        probs = (r_ii * p_iu, p_iu, p_uu)

    for name, p in zip(("p_ii", "p_iu", "p_uu"), probs):
        if not 0.0 < p < 1.0:
            raise InfeasibleTargets(f"solved {name}={p:.6g} is outside (0, 1) for {config}")
    return DyadProbabilities(*probs)


@dataclass(frozen=True, eq=False)
class Network:
    """Undirected simple graph with a binary trait; nodes 0..n_infected-1 are infected.

    ``edges`` is an (E, 2) int array with i < j in each row.
    """

    n_nodes: int
    n_infected: int
    edges: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if (e[:, 0] >= e[:, 1]).any():
                raise ValueError("edges must satisfy i < j (no loops)")
            if e.min() < 0 or e.max() >= self.n_nodes:
                raise ValueError("edge endpoint out of range")
        if not 0 <= self.n_infected <= self.n_nodes:
            raise ValueError("n_infected out of range")
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @classmethod
    def from_edges(cls, n_nodes: int, n_infected: int, pairs: Iterable[tuple[int, int]]) -> Network:
        """Build from arbitrary pairs; orients to i < j, drops loops and duplicates."""
        arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        arr = np.sort(arr, axis=1)
        arr = arr[arr[:, 0] != arr[:, 1]]
        arr = np.unique(arr, axis=0)
        return cls(n_nodes, n_infected, arr)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def infected(self) -> np.ndarray:
        z = np.zeros(self.n_nodes, dtype=bool)
        z[: self.n_infected] = True
        z.setflags(write=False)
        return z

    @cached_property
    def degree(self) -> np.ndarray:
        d = np.bincount(self.edges.ravel(), minlength=self.n_nodes).astype(np.int64)
        d.setflags(write=False)
        return d

    @cached_property
    def _csr(self) -> tuple[np.ndarray, np.ndarray]:
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.lexsort((dst, src))
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.cumsum(self.degree, out=indptr[1:])
        return indptr, dst[order]

    @cached_property
    def neighbors(self) -> list[list[int]]:
        """Sorted alter lists, as plain Python lists for tight sampling loops."""
        indptr, idx = self._csr
        flat = idx.tolist()
        return [flat[indptr[i] : indptr[i + 1]] for i in range(self.n_nodes)]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=np.int8)
        a[self.edges[:, 0], self.edges[:, 1]] = 1
        a[self.edges[:, 1], self.edges[:, 0]] = 1
        return a

    def group_mean_degrees(self) -> tuple[float, float]:
        d = self.degree
        return float(d[: self.n_infected].mean()), float(d[self.n_infected :].mean())

    @property
    def true_prevalence(self) -> float:
        return self.n_infected / self.n_nodes


_triu_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _triu(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _triu_cache:
        if len(_triu_cache) > 16:
            _triu_cache.clear()
        i, j = np.triu_indices(n, k=1)
        _triu_cache[n] = (i.astype(np.int64), j.astype(np.int64))
    return _triu_cache[n]


def _bernoulli_subset(n_dyads: int, p: float, rng: np.random.Generator) -> np.ndarray:
    # Independent Bernoulli(p) over n_dyads items, drawn as a Binomial count
    # followed by a uniform subset of that size.
    if p <= 0.0 or n_dyads == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n_dyads)
    m = int(rng.binomial(n_dyads, p))
    return np.sort(rng.choice(n_dyads, size=m, replace=False))


def sample_network(
    probs: DyadProbabilities, config: PopulationConfig, rng: np.random.Generator
) -> Network:
    """Draw one graph: every unordered dyad is an independent Bernoulli trial."""
    n_i, n_u = config.n_infected, config.n_uninfected
    ti, tj = _triu(n_i)
    ii = _bernoulli_subset(len(ti), probs.p_ii, rng)
    iu = _bernoulli_subset(n_i * n_u, probs.p_iu, rng)
    ui, uj = _triu(n_u)
    uu = _bernoulli_subset(len(ui), probs.p_uu, rng)
    edges = np.concatenate([
        np.column_stack((ti[ii], tj[ii])),
        np.column_stack((iu // n_u, n_i + iu % n_u)),
        np.column_stack((n_i + ui[uu], n_i + uj[uu])),
    ]).astype(np.int64)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    return Network(config.n_nodes, n_i, edges)


def connected_components(net: Network) -> np.ndarray:
    """Component label per node."""
    a = sparse.coo_matrix(
        (np.ones(net.n_edges, dtype=np.int8), (net.edges[:, 0], net.edges[:, 1])),
        shape=(net.n_nodes, net.n_nodes),
    )
    return csgraph.connected_components(a, directed=False)[1]


def n_components(net: Network) -> int:
    return int(connected_components(net).max()) + 1 if net.n_nodes else 0


def write_edgelist(net: Network, path: str | Path) -> None:
    lines = [f"N {net.n_nodes} INFECTED {net.n_infected}"]
    lines += [f"{a} {b}" for a, b in net.edges.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edgelist(path: str | Path) -> Network:
    text = Path(path).read_text().splitlines()
    if not text:
        raise NetworkFormatError(f"{path}: line 1: empty file, expected 'N <n> INFECTED <n_i>'")
    head = text[0].split()
    if len(head) != 4 or head[0] != "N" or head[2] != "INFECTED":
        raise NetworkFormatError(f"{path}: line 1: expected 'N <n> INFECTED <n_i>', got {text[0]!r}")
    try:
        n, n_i = int(head[1]), int(head[3])
    except ValueError:
        raise NetworkFormatError(f"{path}: line 1: non-integer header fields") from None
    pairs = []
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        try:
            a, b = int(parts[0]), int(parts[1])
            if len(parts) != 2:
                raise ValueError
        except (ValueError, IndexError):
            raise NetworkFormatError(f"{path}: line {lineno}: expected 'i j', got {line!r}") from None
        if not (0 <= a < b < n):
            raise NetworkFormatError(f"{path}: line {lineno}: need 0 <= i < j < {n}, got {line!r}")
        pairs.append((a, b))
    return Network.from_edges(n, n_i, pairs)
