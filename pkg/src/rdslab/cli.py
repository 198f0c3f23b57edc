"""rdslab command line.

Exit status: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from rdslab import __version__, config, harness, markov, netgen, sampler
from rdslab.estimators import EstimatorError, estimate, salganik_bootstrap

log = logging.getLogger("rdslab")

SEED_ENV = "RDSLAB_SEED"
EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    out = {}
    for p in pairs or []:
        key, sep, value = p.partition("=")
        if not sep or key not in ("seed", "replications", "workers"):
            raise UsageError(f"bad override {p!r}; expected seed=, replications= or workers=")
        out[key] = value
    return out


def _int(value, what: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise UsageError(f"{what} must be an integer, got {value!r}") from None


def _resolve_seed(args, overrides, default: int | None) -> int | None:
    if args.seed is not None:
        return args.seed
    if "seed" in overrides:
        return _int(overrides["seed"], "seed")
    if os.environ.get(SEED_ENV):
        return _int(os.environ[SEED_ENV], SEED_ENV)
    return default


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _lookup_scenario(name: str) -> harness.ScenarioSpec:
    try:
        return harness.get_scenario(name)
    except KeyError:
        raise UsageError(f"no config file or library scenario named {name!r}") from None


def cmd_gen(args) -> int:
    path = Path(args.config)
    pop = config.load_population(path) if path.exists() else _lookup_scenario(args.config).population
    seed = _resolve_seed(args, {}, harness.DEFAULT_SEED)
    probs = netgen.solve_dyad_probabilities(pop)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        net = netgen.sample_network(probs, pop, _stream(seed, k))
        comps = netgen.n_components(net)
        if comps > 1:
            log.warning("network %d has %d connected components", k, comps)
        netgen.write_edgelist(net, out / f"network_{k:03d}.txt")
    print(f"wrote {args.count} network(s) to {out} (p_ii={probs.p_ii:.6g}, p_iu={probs.p_iu:.6g}, "
          f"p_uu={probs.p_uu:.6g})")
    return EXIT_OK


def cmd_sample(args) -> int:
    net = netgen.read_edgelist(args.network)
    path = Path(args.config)
    design = config.load_design(path) if path.exists() else _lookup_scenario(args.config).design
    seed = _resolve_seed(args, {}, harness.DEFAULT_SEED)
    s = sampler.run_rds(net, design, _stream(seed, 0))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sampler.write_sample_csv(s, out / "sample.csv")
    lines = ["wave,count,infected_proportion,mean_degree"]
    lines += [f"{c.wave},{c.count},{c.infected_proportion!r},{c.mean_degree!r}" for c in sampler.wave_census(s)]
    (out / "waves.csv").write_text("\n".join(lines) + "\n")
    status = "died out" if s.died_out else f"stopped in wave {s.truncated_wave}"
    print(f"sampled {len(s)} records ({status}) -> {out / 'sample.csv'}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    s = sampler.read_sample_csv(args.sample)
    sid = Path(args.sample).stem
    rows = []
    for kind, discard in (("vh", args.discard_waves), ("sh", 0), ("mean", 0)):
        try:
            r = estimate(s, kind, discard)
            rows.append((sid, 0, kind, discard, r.value, r.n_used, "ok"))
        except EstimatorError as exc:
            rows.append((sid, 0, kind, discard, float("nan"), 0, type(exc).__name__))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "estimates.csv").write_text(harness._csv(rows, harness.RAW_COLUMNS))
    if args.bootstrap:
        seed = _resolve_seed(args, {}, harness.DEFAULT_SEED)
        brows = []
        for kind, discard in (("vh", args.discard_waves), ("sh", 0), ("mean", 0)):
            try:
                b = salganik_bootstrap(s, kind, args.bootstrap, _stream(seed, 0), discard_waves=discard)
                brows.append((kind, discard, b.ci_low, b.ci_high, b.n_replicates, b.n_failed, b.n_fallback))
            except EstimatorError as exc:
                log.warning("bootstrap for %s failed: %s", kind, exc)
        (out / "bootstrap.csv").write_text(harness._csv(
            brows, ("estimator", "discard_waves", "ci_low", "ci_high", "n_replicates", "n_failed", "n_fallback")))
    for r in rows:
        print(f"{r[2]:5s} discard={r[3]} value={r[4]:.6f} n_used={r[5]} {r[6]}")
    return EXIT_OK


def _load_specs(name: str) -> list[harness.ScenarioSpec]:
    path = Path(name)
    if path.exists():
        return config.load_batch(path)
    groups = harness.library_groups()
    if name in groups or name in groups["all"]:
        return harness.resolve_library(name)
    raise UsageError(f"no config file or library scenario/group named {name!r}")


def cmd_simulate(args) -> int:
    overrides = _parse_overrides(args.set)
    specs = _load_specs(args.config)
    seed = _resolve_seed(args, overrides, None)
    reps = args.replications if args.replications is not None else (
        _int(overrides["replications"], "replications") if "replications" in overrides else None)
    workers = args.workers if args.workers is not None else _int(overrides.get("workers", 1), "workers")
    changes = {}
    if seed is not None:
        changes["master_seed"] = seed
    if reps is not None:
        if reps < 1:
            raise UsageError("replications must be >= 1")
        changes["n_replications"] = reps
    specs = [replace(s, **changes) for s in specs]
    results = []
    for s in specs:
        log.info("running %s (%d replications)", s.scenario_id, s.n_replications)
        results.append(harness.run_scenario(s, workers=workers))
    manifest = harness.write_outputs(results, args.out, {"config": args.config})
    for res in results:
        m = res.summary[harness.HEADLINE_VH.key] if harness.HEADLINE_VH.key in res.summary.estimators else None
        line = f"{res.spec.scenario_id}: true_mu={res.summary.true_mu:.4f}"
        if m is not None:
            line += f" vh mean={m.mean:.4f} bias={m.bias:+.4f} (se {m.mc_se:.4f})"
        print(line)
    print(f"wrote {len(results)} scenario(s) to {args.out}; spec_hash {manifest['spec_hash'][:12]}")
    return EXIT_OK


def cmd_mixing(args) -> int:
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    if args.network:
        net = netgen.read_edgelist(args.network)
    else:
        net = markov.two_clique_graph(bridges=1 if args.demo == "clustered" else 5)
    tm = markov.transition_matrix(net)
    if tm.has_isolated:
        log.warning("isolated nodes %s have undefined walk rows", np.flatnonzero(tm.isolated).tolist())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    powers = markov.n_step_series(tm, args.steps)
    width = len(str(args.steps))
    for k, m in enumerate(powers, start=1):
        markov.write_matrix_csv(m, out / f"step_{k:0{width}d}.csv")
    scores = [markov.column_spread(m) for m in powers]
    (out / "scores.csv").write_text("step,column_spread\n" + "".join(f"{k},{v!r}\n" for k, v in enumerate(scores, 1)))
    markov.write_heatmap_bins(out / "heatmap_bins.csv")
    if net.n_edges:
        p = markov.stationary(net).probs
        (out / "stationary.csv").write_text("node,probability\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(p)))
    print(f"wrote T^1..T^{args.steps} to {out}; spread step1={scores[0]:.4f} step{args.steps}={scores[-1]:.4f}")
    return EXIT_OK


def cmd_library(args) -> int:
    lib = harness.scenario_library()
    if args.format == "json":
        payload = {
            "scenarios": [{"scenario_id": s.scenario_id, "figures": list(s.figures), "description": s.description}
                          for s in lib],
            "groups": harness.library_groups(),
        }
        print(json.dumps(payload, indent=2))
        return EXIT_OK
    width = max(len(s.scenario_id) for s in lib)
    for s in lib:
        print(f"{s.scenario_id:{width}s}  {','.join(s.figures):24s}  {s.description}")
    print()
    for g, ids in harness.library_groups().items():
        print(f"group {g}: {len(ids)} scenario(s)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rdslab", description="Respondent-driven sampling simulation laboratory")
    p.add_argument("--version", action="version", version=f"rdslab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="sample networks from a population config")
    g.add_argument("--config", required=True, help="population YAML or library scenario id")
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("sample", help="run one RDS sample on an edge-list network")
    s.add_argument("--network", required=True)
    s.add_argument("--config", required=True, help="design YAML or library scenario id")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("estimate", help="estimate prevalence from a sample CSV")
    e.add_argument("--sample", required=True)
    e.add_argument("--discard-waves", type=int, default=1)
    e.add_argument("--bootstrap", type=int, default=0, metavar="N", help="bootstrap replicates (0 = none)")
    e.add_argument("--seed", type=int)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_estimate)

    m = sub.add_parser("simulate", help="run a scenario batch")
    m.add_argument("--config", required=True, help="batch YAML, library scenario id, or library group")
    m.add_argument("--replications", type=int)
    m.add_argument("--seed", type=int)
    m.add_argument("--workers", type=int)
    m.add_argument("--set", action="append", metavar="KEY=VALUE", help="override seed/replications/workers")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_simulate)

    x = sub.add_parser("mixing", help="n-step transition matrices and column-spread scores")
    src = x.add_mutually_exclusive_group(required=True)
    src.add_argument("--network")
    src.add_argument("--demo", choices=("clustered", "mixed"))
    x.add_argument("--steps", type=int, required=True)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_mixing)

    lib = sub.add_parser("library", help="list built-in scenarios")
    lib.add_argument("--format", choices=("text", "json"), default="text")
    lib.set_defaults(func=cmd_library)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rdslab {args.subcommand}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (config.ConfigError, netgen.NetworkFormatError, sampler.SampleFormatError) as exc:
        print(f"rdslab {args.subcommand}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (netgen.InfeasibleTargets, sampler.InsufficientEligibleSeeds, EstimatorError, OSError) as exc:
        print(f"rdslab {args.subcommand}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
