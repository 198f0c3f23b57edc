"""Prevalence estimators for RDS samples.

All estimators here use draw-wise weights only: a record's weight is the
reciprocal of its reported degree. List-wise inclusion probabilities are
never estimated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from rdslab.sampler import RdsSample

ESTIMATOR_KINDS = ("vh", "sh", "mean")


class EstimatorError(ValueError):
    """Estimator undefined on this sample; harness records it as a failed replicate."""


class EmptyAfterDiscard(EstimatorError):
    pass


class DegenerateGroups(EstimatorError):
    pass


class NoCrossReferrals(EstimatorError):
    pass


@dataclass(frozen=True)
class EstimateResult:
    estimator_kind: str
    value: float
    n_used: int
    discarded_waves: int = 0


@dataclass(frozen=True)
class ShComponents:
    d_hat_a: float
    d_hat_b: float
    c_hat_ab: float
    c_hat_ba: float
    r_aa: int
    r_ab: int
    r_ba: int
    r_bb: int


@dataclass(frozen=True)
class BootstrapResult:
    replicate_values: np.ndarray = field(repr=False)
    ci_low: float
    ci_high: float
    n_replicates: int
    # Replicates whose chain hit an empty pool and fell back to all records.
    n_fallback: int = 0
    n_failed: int = 0


def vh_estimate(sample: RdsSample, discard_waves: int = 0) -> EstimateResult:
    """Degree-reciprocal weighted mean of the trait over records with wave >= discard_waves."""
    keep = sample.wave >= discard_waves
    n = int(keep.sum())
    if n == 0:
        raise EmptyAfterDiscard(f"no records left after discarding {discard_waves} wave(s)")
    w = 1.0 / sample.reported_degree[keep]
    value = float(np.dot(w, sample.trait[keep]) / w.sum())
    return EstimateResult("vh", value, n, discard_waves)


def sh_components(sample: RdsSample) -> ShComponents:
    z = sample.trait
    if z.all() or not z.any():
        raise DegenerateGroups("sample contains only one group")
    inv = 1.0 / sample.reported_degree
    d_a = z.sum() / inv[z].sum()
    d_b = (~z).sum() / inv[~z].sum()

    rt = sample.recruiter_trait()
    recruited = rt >= 0
    src = rt[recruited].astype(bool)
    dst = z[recruited]
    r_aa = int((src & dst).sum())
    r_ab = int((src & ~dst).sum())
    r_ba = int((~src & dst).sum())
    r_bb = int((~src & ~dst).sum())
    if r_aa + r_ab == 0 or r_ba + r_bb == 0:
        raise DegenerateGroups("a group made no referrals")
    return ShComponents(
        float(d_a), float(d_b), r_ab / (r_aa + r_ab), r_ba / (r_ba + r_bb), r_aa, r_ab, r_ba, r_bb
    )


def sh_from_components(c: ShComponents) -> float:
    num = c.d_hat_b * c.c_hat_ba
    den = c.d_hat_a * c.c_hat_ab + num
    if den == 0:
        raise NoCrossReferrals("no cross-group referrals in either direction")
    return num / den


def sh_estimate(sample: RdsSample) -> EstimateResult:
    """Cross-relation balancing estimator with infected as group A."""
    return EstimateResult("sh", sh_from_components(sh_components(sample)), len(sample))


def mean_estimate(sample: RdsSample) -> EstimateResult:
    if len(sample) == 0:
        raise EstimatorError("empty sample")
    return EstimateResult("mean", float(sample.trait.mean()), len(sample))


def estimate(sample: RdsSample, kind: str, discard_waves: int = 0) -> EstimateResult:
    if kind == "vh":
        return vh_estimate(sample, discard_waves)
    if kind == "sh":
        return sh_estimate(sample)
    if kind == "mean":
        return mean_estimate(sample)
    raise ValueError(f"unknown estimator kind {kind!r}; expected one of {ESTIMATOR_KINDS}")


def bootstrap_chains(
    sample: RdsSample, n_replicates: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Record-index chains of the trait-conditioned resampling scheme.

    Returns (chains, fallback) where chains has shape (n_replicates, n) and
    fallback flags replicates that drew from the full record set because the
    pool for the current trait was empty.
    """
    n = len(sample)
    z = sample.trait
    rt = sample.recruiter_trait()
    pools = [np.flatnonzero(rt == g) for g in (0, 1)]
    everything = np.arange(n)
    pools = [p if len(p) else everything for p in pools]
    empty = [not (rt == g).any() for g in (0, 1)]

    chains = np.empty((n_replicates, n), dtype=np.int64)
    fallback = np.zeros(n_replicates, dtype=bool)
    cur = rng.integers(n, size=n_replicates)
    chains[:, 0] = cur
    for t in range(1, n):
        g = z[cur]
        u = rng.random(n_replicates)
        pick0 = pools[0][(u * len(pools[0])).astype(np.int64)]
        pick1 = pools[1][(u * len(pools[1])).astype(np.int64)]
        if empty[0]:
            fallback |= ~g
        if empty[1]:
            fallback |= g
        cur = np.where(g, pick1, pick0)
        chains[:, t] = cur
    return chains, fallback


def _chain_sample(sample: RdsSample, chain: np.ndarray) -> RdsSample:
    # A replicate is one referral chain: draw t is recruited by draw t-1.
    n = len(chain)
    return RdsSample(
        node=sample.node[chain],
        wave=np.arange(n),
        recruiter=np.concatenate([[-1], sample.node[chain[:-1]]]),
        recruiter_draw=np.arange(-1, n - 1),
        reported_degree=sample.reported_degree[chain],
        trait=sample.trait[chain],
    )


def salganik_bootstrap(
    sample: RdsSample,
    estimator_kind: str = "vh",
    n_replicates: int = 1000,
    rng: np.random.Generator | None = None,
    discard_waves: int = 0,
) -> BootstrapResult:
    """Percentile 90% interval from trait-conditioned chain resampling.

    The first record of each replicate is uniform over all records; each
    following record is uniform over the records recruited by someone with the
    same trait as the previous draw. Replicates keep the original size.
    """
    if len(sample) == 0:
        raise EstimatorError("empty sample")
    if estimator_kind not in ESTIMATOR_KINDS:
        raise ValueError(f"unknown estimator kind {estimator_kind!r}")
    rng = np.random.default_rng() if rng is None else rng
    chains, fallback = bootstrap_chains(sample, n_replicates, rng)

    if estimator_kind == "vh":
        # Chain position is the replicate's wave, so discarding k waves drops
        # the first k draws.
        kept = chains[:, discard_waves:]
        if kept.shape[1] == 0:
            raise EmptyAfterDiscard("replicates are shorter than discard_waves")
        w = 1.0 / sample.reported_degree[kept]
        values = (w * sample.trait[kept]).sum(axis=1) / w.sum(axis=1)
    elif estimator_kind == "mean":
        values = sample.trait[chains].mean(axis=1)
    else:
        values = np.full(n_replicates, np.nan)
        for b in range(n_replicates):
            try:
                values[b] = sh_estimate(_chain_sample(sample, chains[b])).value
            except EstimatorError:
                pass

    ok = values[np.isfinite(values)]
    if len(ok) == 0:
        raise EstimatorError(f"{estimator_kind} undefined on every bootstrap replicate")
    lo, hi = np.percentile(ok, [5, 95])
    return BootstrapResult(
        values, float(lo), float(hi), n_replicates, int(fallback.sum()), int(n_replicates - len(ok))
    )
