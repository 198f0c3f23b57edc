"""Replicated simulation runs and their bias/variance/MSE summaries."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats

from rdslab import __version__
from rdslab.estimators import ESTIMATOR_KINDS, EstimatorError, estimate
from rdslab.netgen import (
    DyadProbabilities,
    PopulationConfig,
    n_components,
    sample_network,
    solve_dyad_probabilities,
)
from rdslab.sampler import SamplingDesign, run_rds

log = logging.getLogger(__name__)

DEFAULT_SEED = 20091001
DEFAULT_REPLICATIONS = 1000
QUANTILES = (5, 25, 50, 75, 95)


class UndefinedEfficiency(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str
    discard_waves: int = 0

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}; expected one of {ESTIMATOR_KINDS}")
        if self.discard_waves < 0:
            raise ValueError("discard_waves must be >= 0")
        if self.kind != "vh" and self.discard_waves:
            raise ValueError(f"discard_waves only applies to vh, got {self.kind} with {self.discard_waves}")

    @property
    def key(self) -> str:
        return f"vh_d{self.discard_waves}" if self.kind == "vh" else self.kind


HEADLINE_VH = EstimatorSpec("vh", 1)
DEFAULT_ESTIMATORS = (HEADLINE_VH, EstimatorSpec("vh", 0), EstimatorSpec("sh"), EstimatorSpec("mean"))
DISCARD_ESTIMATORS = tuple(EstimatorSpec("vh", k) for k in range(5)) + (
    EstimatorSpec("sh"),
    EstimatorSpec("mean"),
)


@dataclass(frozen=True)
class ScenarioSpec:
    scenario_id: str
    population: PopulationConfig = PopulationConfig()
    design: SamplingDesign = SamplingDesign()
    estimators: tuple[EstimatorSpec, ...] = DEFAULT_ESTIMATORS
    n_replications: int = DEFAULT_REPLICATIONS
    master_seed: int = DEFAULT_SEED
    figures: tuple[str, ...] = ()
    description: str = ""

    def __post_init__(self):
        if self.n_replications < 1:
            raise ValueError("n_replications must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        keys = [e.key for e in self.estimators]
        if len(set(keys)) != len(keys):
            raise ValueError(f"duplicate estimators in {self.scenario_id}: {keys}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimators"] = [asdict(e) for e in self.estimators]
        d["figures"] = list(self.figures)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ScenarioSpec:
        d = dict(d)
        d["population"] = PopulationConfig(**d.get("population", {}))
        d["design"] = SamplingDesign(**d.get("design", {}))
        if "estimators" in d:
            d["estimators"] = tuple(EstimatorSpec(**e) for e in d["estimators"])
        d["figures"] = tuple(d.get("figures", ()))
        return cls(**d)

    def spec_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def replication_rng(master_seed: int, scenario_id: str, replication: int) -> np.random.Generator:
    """Independent stream keyed by (master_seed, scenario_id, replication index)."""
    sid = int.from_bytes(hashlib.sha256(scenario_id.encode()).digest()[:8], "little")
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(sid, replication))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class ReplicationOutcome:
    replication: int
    values: dict[str, float]
    n_used: dict[str, int]
    status: dict[str, str]
    sample_size: int
    died_out: bool
    truncated_wave: int | None
    n_components: int
    n_edges: int


def run_replication(spec: ScenarioSpec, probs: DyadProbabilities, r: int) -> ReplicationOutcome:
    rng = replication_rng(spec.master_seed, spec.scenario_id, r)
    net = sample_network(probs, spec.population, rng)
    sample = run_rds(net, spec.design, rng)
    values, n_used, status = {}, {}, {}
    for est in spec.estimators:
        try:
            res = estimate(sample, est.kind, est.discard_waves)
            values[est.key], n_used[est.key], status[est.key] = res.value, res.n_used, "ok"
        except EstimatorError as exc:
            values[est.key], n_used[est.key], status[est.key] = float("nan"), 0, type(exc).__name__
    return ReplicationOutcome(
        r, values, n_used, status, len(sample), sample.died_out, sample.truncated_wave,
        n_components(net), net.n_edges,
    )


def _run_block(spec: ScenarioSpec, probs: DyadProbabilities, reps: list[int]) -> list[ReplicationOutcome]:
    return [run_replication(spec, probs, r) for r in reps]


@dataclass(frozen=True)
class EstimatorMetrics:
    key: str
    kind: str
    discard_waves: int
    n_ok: int
    n_failed: int
    mean: float
    bias: float
    variance: float
    sd: float
    mse: float
    mc_se: float
    quantiles: dict[int, float]


@dataclass
class MetricsSummary:
    scenario_id: str
    true_mu: float
    die_out_rate: float
    n_replications: int
    estimators: dict[str, EstimatorMetrics]
    # Per-replication values (NaN for failures), for pairwise comparisons.
    values: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def __getitem__(self, key: str) -> EstimatorMetrics:
        return self.estimators[key]


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    summary: MetricsSummary
    outcomes: list[ReplicationOutcome] = field(repr=False)


def summarize_values(key: str, spec: EstimatorSpec, values: np.ndarray, true_mu: float) -> EstimatorMetrics:
    ok = values[np.isfinite(values)]
    n_ok = len(ok)
    nan = float("nan")
    if n_ok == 0:
        return EstimatorMetrics(key, spec.kind, spec.discard_waves, 0, len(values), nan, nan, nan, nan, nan, nan,
                                {q: nan for q in QUANTILES})
    mean = float(ok.mean())
    var = float(ok.var())  # divide by R so mse = bias^2 + variance exactly
    bias = mean - true_mu
    mse = float(np.mean((ok - true_mu) ** 2))
    qs = np.percentile(ok, QUANTILES)
    return EstimatorMetrics(
        key, spec.kind, spec.discard_waves, n_ok, len(values) - n_ok, mean, bias, var, var**0.5, mse,
        (var / n_ok) ** 0.5, {q: float(v) for q, v in zip(QUANTILES, qs)},
    )


def summarize(spec: ScenarioSpec, outcomes: list[ReplicationOutcome]) -> MetricsSummary:
    true_mu = spec.population.true_prevalence
    values = {}
    metrics = {}
    for est in spec.estimators:
        v = np.array([o.values[est.key] for o in outcomes], dtype=float)
        values[est.key] = v
        metrics[est.key] = summarize_values(est.key, est, v, true_mu)
    die_out = float(np.mean([o.died_out for o in outcomes]))
    return MetricsSummary(spec.scenario_id, true_mu, die_out, len(outcomes), metrics, values)


def run_scenario(spec: ScenarioSpec, workers: int = 1) -> ScenarioResult:
    probs = solve_dyad_probabilities(spec.population)
    reps = list(range(spec.n_replications))
    if workers <= 1 or spec.n_replications == 1:
        outcomes = _run_block(spec, probs, reps)
    else:
        blocks = [reps[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, [spec] * workers, [probs] * workers, blocks))
        outcomes = sorted((o for part in parts for o in part), key=lambda o: o.replication)
    summary = summarize(spec, outcomes)
    n_disconnected = sum(o.n_components > 1 for o in outcomes)
    if n_disconnected:
        log.info("%s: %d/%d sampled graphs were disconnected", spec.scenario_id, n_disconnected, len(outcomes))
    return ScenarioResult(spec, summary, outcomes)


@dataclass(frozen=True)
class RelativeEfficiency:
    scenario_id: str
    value: float
    mse_vh: float
    mse_sh: float
    n_pairs: int


def relative_efficiency(summary: MetricsSummary, vh_key: str = HEADLINE_VH.key) -> RelativeEfficiency:
    """MSE of V-H over MSE of S-H on replications where both are defined."""
    if vh_key not in summary.values or "sh" not in summary.values:
        raise UndefinedEfficiency(f"{summary.scenario_id}: needs both {vh_key} and sh")
    a, b = summary.values[vh_key], summary.values["sh"]
    both = np.isfinite(a) & np.isfinite(b)
    if not both.any():
        raise UndefinedEfficiency(f"{summary.scenario_id}: no replication with both estimators defined")
    mse_vh = float(np.mean((a[both] - summary.true_mu) ** 2))
    mse_sh = float(np.mean((b[both] - summary.true_mu) ** 2))
    if mse_sh == 0:
        raise UndefinedEfficiency(f"{summary.scenario_id}: S-H has zero MSE")
    return RelativeEfficiency(summary.scenario_id, mse_vh / mse_sh, mse_vh, mse_sh, int(both.sum()))


def spearman_trend(x, y) -> float:
    return float(stats.spearmanr(x, y).statistic)


# ---------------------------------------------------------------------------
# scenario library

SEED_LABELS = {"ppd_all_uninfected": "uninfected", "ppd_random": "random", "ppd_all_infected": "infected"}
WAVE_DESIGNS = {6: 6, 4: 20}  # waves -> seeds
FRACTION_SIZES = {50: 1000, 60: 835, 70: 715, 80: 625, 90: 555, 95: 525}
ACTIVITY_RATIOS = (1.0, 1.1, 1.4, 1.8, 3.0)
LOW_ACTIVITY_RATIOS = (1 / 1.1, 1 / 1.4, 1 / 1.8, 1 / 3.0)
HIGH_HOMOPHILY = PopulationConfig(homophily_ratio_ii=13.0, homophily_ratio_uu=4.0)


def _w_label(w: float) -> str:
    if w >= 1:
        return f"w{w:g}"
    return f"w1over{1 / w:.2g}"


def scenario_library() -> list[ScenarioSpec]:
    out: list[ScenarioSpec] = []
    for replacement, figs in (("without", ("fig4", "fig7", "table2")), ("with", ("fig12",))):
        for policy, label in SEED_LABELS.items():
            for waves, seeds in WAVE_DESIGNS.items():
                prefix = "waves" if replacement == "without" else "withrepl"
                out.append(ScenarioSpec(
                    f"{prefix}{waves}_seeds_{label}",
                    design=SamplingDesign(n_seeds=seeds, seed_policy=policy, replacement=replacement),
                    estimators=DISCARD_ESTIMATORS,
                    figures=figs,
                    description=f"{seeds} {label} seeds, ~{waves} waves, sampling {replacement} replacement",
                ))
    for policy, label in SEED_LABELS.items():
        out.append(ScenarioSpec(
            f"standard_seeds_{label}",
            design=SamplingDesign(seed_policy=policy),
            figures=("fig6", "fig8", "table2"),
            description=f"baseline population and design, 10 {label} seeds",
        ))
        out.append(ScenarioSpec(
            f"homophily_high_seeds_{label}",
            population=HIGH_HOMOPHILY,
            design=SamplingDesign(seed_policy=policy),
            figures=("fig6", "table2"),
            description=f"homophily ratios 13:4, 10 {label} seeds",
        ))
        out.append(ScenarioSpec(
            f"referral_biased_seeds_{label}",
            design=SamplingDesign(seed_policy=policy, referral_bias_infected=1.2),
            figures=("fig8", "table2"),
            description=f"infected alters 1.2x as likely to get a coupon, 10 {label} seeds",
        ))
    for ratios, figs in ((ACTIVITY_RATIOS, ("fig10", "fig11", "table3")), (LOW_ACTIVITY_RATIOS, ("fig11_low_w",))):
        for w in ratios:
            for pct, n in FRACTION_SIZES.items():
                pop = PopulationConfig(n_nodes=n, activity_ratio=w, homophily_ratio_uu=2.0 if w == 1 else None)
                out.append(ScenarioSpec(
                    f"fraction{pct}_{_w_label(w)}",
                    population=pop,
                    figures=figs,
                    description=f"N={n} (sample fraction ~{pct}%), relative activity w={w:.4g}",
                ))
    return out


def library_groups() -> dict[str, list[str]]:
    lib = scenario_library()
    groups = {
        "wave_study": [s.scenario_id for s in lib if s.scenario_id.startswith("waves")],
        "homophily": [s.scenario_id for s in lib if "fig6" in s.figures],
        "referral": [s.scenario_id for s in lib if "fig8" in s.figures],
        "sample_fraction": [s.scenario_id for s in lib if "table3" in s.figures],
        "sample_fraction_low_w": [s.scenario_id for s in lib if "fig11_low_w" in s.figures],
        "with_replacement": [s.scenario_id for s in lib if "fig12" in s.figures],
        "table2": [s.scenario_id for s in lib if "table2" in s.figures],
        "table3": [s.scenario_id for s in lib if "table3" in s.figures],
    }
    groups["all"] = [s.scenario_id for s in lib]
    return groups


def get_scenario(scenario_id: str, **overrides) -> ScenarioSpec:
    for s in scenario_library():
        if s.scenario_id == scenario_id:
            return replace(s, **overrides)
    raise KeyError(scenario_id)


def resolve_library(name: str, **overrides) -> list[ScenarioSpec]:
    """A scenario id or group name to specs, with field overrides applied."""
    groups = library_groups()
    ids = groups.get(name, [name])
    return [get_scenario(i, **overrides) for i in ids]


# ---------------------------------------------------------------------------
# output tables

RAW_COLUMNS = ("scenario_id", "replication", "estimator", "discard_waves", "value", "n_used", "status")
REPLICATION_COLUMNS = ("scenario_id", "replication", "sample_size", "died_out", "truncated_wave",
                       "n_components", "n_edges")
SUMMARY_COLUMNS = ("scenario_id", "estimator", "discard_waves", "n_ok", "n_failed", "true_mu", "mean", "bias",
                   "mc_se", "variance", "sd", "mse") + tuple(f"q{q:02d}" for q in QUANTILES) + ("die_out_rate",)
EFFICIENCY_COLUMNS = ("scenario_id", "relative_efficiency", "mse_vh", "mse_sh", "n_pairs")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv(rows, columns) -> str:
    lines = [",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def raw_rows(result: ScenarioResult):
    for o in result.outcomes:
        for est in result.spec.estimators:
            yield (result.spec.scenario_id, o.replication, est.kind, est.discard_waves,
                   o.values[est.key], o.n_used[est.key], o.status[est.key])


def summary_rows(result: ScenarioResult):
    s = result.summary
    for m in s.estimators.values():
        yield (s.scenario_id, m.kind, m.discard_waves, m.n_ok, m.n_failed, s.true_mu, m.mean, m.bias, m.mc_se,
               m.variance, m.sd, m.mse, *[m.quantiles[q] for q in QUANTILES], s.die_out_rate)


def write_outputs(results: list[ScenarioResult], out_dir: str | Path, extra_manifest: dict | None = None) -> dict:
    """Write estimates.csv, replications.csv, summary.csv, efficiency.csv and manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "estimates.csv").write_text(_csv((r for res in results for r in raw_rows(res)), RAW_COLUMNS))
    (out / "replications.csv").write_text(_csv(
        ((res.spec.scenario_id, o.replication, o.sample_size, o.died_out, o.truncated_wave, o.n_components,
          o.n_edges) for res in results for o in res.outcomes),
        REPLICATION_COLUMNS,
    ))
    (out / "summary.csv").write_text(_csv((r for res in results for r in summary_rows(res)), SUMMARY_COLUMNS))
    eff_rows = []
    for res in results:
        try:
            e = relative_efficiency(res.summary)
            eff_rows.append((e.scenario_id, e.value, e.mse_vh, e.mse_sh, e.n_pairs))
        except UndefinedEfficiency:
            pass
    (out / "efficiency.csv").write_text(_csv(eff_rows, EFFICIENCY_COLUMNS))
    batch = [res.spec.to_dict() for res in results]
    manifest = {
        "rdslab_version": __version__,
        "spec_hash": hashlib.sha256(json.dumps(batch, sort_keys=True).encode()).hexdigest(),
        "master_seeds": sorted({res.spec.master_seed for res in results}),
        "scenarios": [{"scenario_id": res.spec.scenario_id, "spec_hash": res.spec.spec_hash(),
                       "n_replications": res.spec.n_replications, "figures": list(res.spec.figures)}
                      for res in results],
        "files": ["estimates.csv", "replications.csv", "summary.csv", "efficiency.csv"],
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
