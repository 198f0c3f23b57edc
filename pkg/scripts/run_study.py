#!/usr/bin/env python3
"""Run library scenario groups and write tidy CSVs plus a console digest.

    python3 scripts/run_study.py wave_study homophily --replications 1000 --out results/
"""

import argparse
import logging
import time
from pathlib import Path

from rdslab.harness import (
    DEFAULT_SEED,
    UndefinedEfficiency,
    library_groups,
    relative_efficiency,
    resolve_library,
    run_scenario,
    write_outputs,
)


def main() -> None:
    groups = library_groups()
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("groups", nargs="+", choices=sorted(groups) + groups["all"], metavar="GROUP_OR_ID",
                    help=f"library group ({', '.join(sorted(groups))}) or scenario id")
    ap.add_argument("--replications", type=int, default=200)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    for name in args.groups:
        specs = resolve_library(name, n_replications=args.replications, master_seed=args.seed)
        results = []
        for spec in specs:
            t0 = time.perf_counter()
            res = run_scenario(spec, workers=args.workers)
            results.append(res)
            m = res.summary["vh_d1"]
            try:
                re = f"{relative_efficiency(res.summary).value:.2f}"
            except UndefinedEfficiency:
                re = "n/a"
            print(f"{spec.scenario_id:32s} bias={m.bias:+.4f} se={m.mc_se:.4f} sd={m.sd:.4f} "
                  f"RE={re:>5s} die_out={res.summary.die_out_rate:.3f} ({time.perf_counter() - t0:.1f}s)")
        write_outputs(results, args.out / name, {"group": name})
        print(f"-> {args.out / name}")


if __name__ == "__main__":
    main()
