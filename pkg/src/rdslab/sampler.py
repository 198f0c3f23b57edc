"""Respondent-driven recruitment on a Network.

Seeds are drawn by sequential probability-proportional-to-degree sampling,
then recruitment proceeds breadth-first by wave. Each respondent hands out up
to ``max_coupons`` coupons to distinct alters, optionally favouring infected
alters, until the target sample size is reached or recruitment dies out.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from rdslab.netgen import Network

SEED_POLICIES = ("ppd_random", "ppd_all_infected", "ppd_all_uninfected")


class InsufficientEligibleSeeds(ValueError):
    pass


class SampleFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SamplingDesign:
    n_seeds: int = 10
    seed_policy: str = "ppd_random"
    max_coupons: int = 2
    target_size: int = 500
    replacement: Literal["with", "without"] = "without"
    referral_bias_infected: float = 1.0

    def __post_init__(self):
        if self.seed_policy not in SEED_POLICIES:
            raise ValueError(f"seed_policy must be one of {SEED_POLICIES}, got {self.seed_policy!r}")
        if self.replacement not in ("with", "without"):
            raise ValueError(f"replacement must be 'with' or 'without', got {self.replacement!r}")
        if self.n_seeds < 1 or self.n_seeds > self.target_size:
            raise ValueError("need 1 <= n_seeds <= target_size")
        if self.max_coupons < 1:
            raise ValueError("max_coupons must be >= 1")
        if not self.referral_bias_infected > 0:
            raise ValueError("referral_bias_infected must be positive")

    @property
    def with_replacement(self) -> bool:
        return self.replacement == "with"


@dataclass(frozen=True)
class SampleRecord:
    draw_index: int
    node: int
    wave: int
    recruiter: int | None
    reported_degree: int
    trait: bool
    # Draw index of the recruiting record; disambiguates duplicate nodes
    # under with-replacement sampling.
    recruiter_draw: int | None = None


@dataclass(frozen=True, eq=False)
class RdsSample:
    """Recruitment records stored column-wise; row k is draw k.

    Seeds carry ``recruiter == recruiter_draw == -1``.
    """

    node: np.ndarray
    wave: np.ndarray
    recruiter: np.ndarray
    recruiter_draw: np.ndarray
    reported_degree: np.ndarray
    trait: np.ndarray
    design: SamplingDesign | None = None
    truncated_wave: int | None = None
    died_out: bool = False
    fallback: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n = len(self.node)
        for name in ("wave", "recruiter", "recruiter_draw", "reported_degree", "trait"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has length {len(getattr(self, name))}, expected {n}")

    def __len__(self) -> int:
        return len(self.node)

    @property
    def records(self) -> list[SampleRecord]:
        out = []
        for k in range(len(self)):
            rec = int(self.recruiter[k])
            rd = int(self.recruiter_draw[k])
            out.append(
                SampleRecord(
                    draw_index=k,
                    node=int(self.node[k]),
                    wave=int(self.wave[k]),
                    recruiter=None if rec < 0 else rec,
                    reported_degree=int(self.reported_degree[k]),
                    trait=bool(self.trait[k]),
                    recruiter_draw=None if rd < 0 else rd,
                )
            )
        return out

    @classmethod
    def from_records(cls, records, design=None, truncated_wave=None, died_out=False) -> RdsSample:
        records = list(records)
        by_node = {r.node: r.draw_index for r in records}
        rd = []
        for r in records:
            if r.recruiter_draw is not None:
                rd.append(r.recruiter_draw)
            elif r.recruiter is None:
                rd.append(-1)
            else:
                rd.append(by_node.get(r.recruiter, -1))
        return cls(
            node=np.array([r.node for r in records], dtype=np.int64),
            wave=np.array([r.wave for r in records], dtype=np.int64),
            recruiter=np.array([-1 if r.recruiter is None else r.recruiter for r in records], dtype=np.int64),
            recruiter_draw=np.array(rd, dtype=np.int64),
            reported_degree=np.array([r.reported_degree for r in records], dtype=np.int64),
            trait=np.array([r.trait for r in records], dtype=bool),
            design=design,
            truncated_wave=truncated_wave,
            died_out=died_out,
        )

    def subset(self, mask: np.ndarray) -> RdsSample:
        """Rows selected by mask; recruiter links are kept as stored."""
        return RdsSample(
            self.node[mask], self.wave[mask], self.recruiter[mask], self.recruiter_draw[mask],
            self.reported_degree[mask], self.trait[mask], self.design, self.truncated_wave, self.died_out,
        )

    def recruiter_trait(self) -> np.ndarray:
        """Trait of each record's recruiter as int8: 1, 0, or -1 for seeds."""
        out = np.full(len(self), -1, dtype=np.int8)
        has = self.recruiter_draw >= 0
        out[has] = self.trait[self.recruiter_draw[has]]
        return out


class _Uniforms:
    """Buffered scalar uniforms from a Generator (scalar draws are slow)."""

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self.rng = rng
        self.block = block
        self._buf: list[float] = []

    def __call__(self) -> float:
        if not self._buf:
            self._buf = self.rng.random(self.block).tolist()
            self._buf.reverse()
        return self._buf.pop()


def _eligible_seed_mask(net: Network, policy: str) -> np.ndarray:
    mask = net.degree > 0
    if policy == "ppd_all_infected":
        mask &= net.infected
    elif policy == "ppd_all_uninfected":
        mask &= ~net.infected
    return mask


def select_seeds(net: Network, design: SamplingDesign, rng: np.random.Generator) -> list[SampleRecord]:
    """Sequential PPS-by-degree draws without replacement from the eligible set."""
    mask = _eligible_seed_mask(net, design.seed_policy)
    if mask.sum() < design.n_seeds:
        raise InsufficientEligibleSeeds(
            f"policy {design.seed_policy} has {int(mask.sum())} eligible nodes with degree >= 1, "
            f"need {design.n_seeds}"
        )
    weights = np.where(mask, net.degree, 0).astype(float)
    seeds = []
    for k in range(design.n_seeds):
        cum = np.cumsum(weights)
        v = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        weights[v] = 0.0
        seeds.append(
            SampleRecord(k, v, 0, None, int(net.degree[v]), bool(net.infected[v]))
        )
    return seeds


def _draw_alters(eligible: list[int], k: int, bias: float, infected, uniform) -> list[int]:
    """k distinct alters, sequentially, infected ones weighted by `bias`."""
    m = len(eligible)
    if k >= m:
        return list(eligible)
    pool = list(eligible)
    chosen = []
    if bias == 1.0:
        for _ in range(k):
            chosen.append(pool.pop(int(uniform() * len(pool))))
        return chosen
    w = [bias if infected[a] else 1.0 for a in pool]
    for _ in range(k):
        target = uniform() * sum(w)
        acc = 0.0
        pick = len(pool) - 1
        for i, wi in enumerate(w):
            acc += wi
            if target < acc:
                pick = i
                break
        chosen.append(pool.pop(pick))
        w.pop(pick)
    return chosen


def run_rds(net: Network, design: SamplingDesign, rng: np.random.Generator) -> RdsSample:
    seeds = select_seeds(net, design, rng)
    uniform = _Uniforms(rng)
    nbrs = net.neighbors
    infected = net.infected.tolist()
    degree = net.degree.tolist()
    target = design.target_size
    without = not design.with_replacement
    bias = float(design.referral_bias_infected)

    node = [s.node for s in seeds]
    wave = [0] * len(seeds)
    recruiter = [-1] * len(seeds)
    recruiter_draw = [-1] * len(seeds)
    sampled = bytearray(net.n_nodes)
    for v in node:
        sampled[v] = 1

    truncated_wave = 0 if len(node) >= target else None
    current = list(range(len(node)))
    w = 0
    while current and truncated_wave is None:
        order = rng.permutation(len(current)).tolist()
        nxt = []
        for pos in order:
            r = current[pos]
            v = node[r]
            eligible = [a for a in nbrs[v] if not sampled[a]] if without else nbrs[v]
            if not eligible:
                continue
            for a in _draw_alters(eligible, design.max_coupons, bias, infected, uniform):
                nxt.append(len(node))
                node.append(a)
                wave.append(w + 1)
                recruiter.append(v)
                recruiter_draw.append(r)
                sampled[a] = 1
                if len(node) >= target:
                    truncated_wave = w + 1
                    break
            if truncated_wave is not None:
                break
        current = nxt
        w += 1

    node_arr = np.array(node, dtype=np.int64)
    return RdsSample(
        node=node_arr,
        wave=np.array(wave, dtype=np.int64),
        recruiter=np.array(recruiter, dtype=np.int64),
        recruiter_draw=np.array(recruiter_draw, dtype=np.int64),
        reported_degree=np.array([degree[v] for v in node], dtype=np.int64),
        trait=np.array([infected[v] for v in node], dtype=bool),
        design=design,
        truncated_wave=truncated_wave,
        died_out=len(node) < target,
    )


@dataclass(frozen=True)
class WaveCensus:
    wave: int
    count: int
    infected_proportion: float
    mean_degree: float


def wave_census(sample: RdsSample) -> list[WaveCensus]:
    out = []
    for w in np.unique(sample.wave).tolist():
        m = sample.wave == w
        out.append(
            WaveCensus(w, int(m.sum()), float(sample.trait[m].mean()), float(sample.reported_degree[m].mean()))
        )
    return out


SAMPLE_COLUMNS = ("draw_index", "node", "wave", "recruiter", "reported_degree", "trait")


def write_sample_csv(sample: RdsSample, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_COLUMNS)
        for k in range(len(sample)):
            w.writerow(
                [k, int(sample.node[k]), int(sample.wave[k]), int(sample.recruiter[k]),
                 int(sample.reported_degree[k]), int(sample.trait[k])]
            )


def read_sample_csv(path: str | Path) -> RdsSample:
    """Inverse of write_sample_csv.

    Recruiter links are resolved to the most recent earlier record of the
    recruiter node, which is exact without replacement.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SAMPLE_COLUMNS:
            raise SampleFormatError(f"{path}: line 1: expected header {','.join(SAMPLE_COLUMNS)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([int(x) for x in row])
                if len(row) != len(SAMPLE_COLUMNS):
                    raise ValueError
            except ValueError:
                raise SampleFormatError(f"{path}: line {lineno}: malformed row {row!r}") from None
    rows.sort(key=lambda r: r[0])
    last_seen: dict[int, int] = {}
    rd = []
    for k, (idx, v, _, rec, _, _) in enumerate(rows):
        if idx != k:
            raise SampleFormatError(f"{path}: draw_index values must be 0..n-1")
        if rec < 0:
            rd.append(-1)
        elif rec in last_seen:
            rd.append(last_seen[rec])
        else:
            raise SampleFormatError(f"{path}: recruiter {rec} of draw {idx} does not appear earlier")
        last_seen[v] = k
    arr = np.array(rows, dtype=np.int64).reshape(-1, len(SAMPLE_COLUMNS))
    return RdsSample(
        node=arr[:, 1], wave=arr[:, 2], recruiter=arr[:, 3], recruiter_draw=np.array(rd, dtype=np.int64),
        reported_degree=arr[:, 4], trait=arr[:, 5].astype(bool),
    )
