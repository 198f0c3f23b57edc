#!/usr/bin/env python3
"""Column-spread scores of T^k for the clustered and mixed two-clique demo graphs."""

import argparse

from rdslab.markov import mixing_diagnostic, transition_matrix, two_clique_graph


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=9)
    args = ap.parse_args()
    clustered = mixing_diagnostic(transition_matrix(two_clique_graph(bridges=1)), args.steps)
    mixed = mixing_diagnostic(transition_matrix(two_clique_graph(bridges=5)), args.steps)
    print("step  clustered  mixed")
    for k, (a, b) in enumerate(zip(clustered, mixed), start=1):
        print(f"{k:4d}  {a:9.4f}  {b:6.4f}")


if __name__ == "__main__":
    main()
