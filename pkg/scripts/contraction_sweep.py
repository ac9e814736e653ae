"""Neumann-series contraction ratio against the slope of the bent interface."""

import argparse

from growthfsi.model_problems import contraction_sweep, interface_demo_problem, sweep_csv


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=32)
    ap.add_argument("--etas", type=float, nargs="+", default=[0.01, 0.02, 0.04, 0.08, 0.16, 0.5])
    ap.add_argument("--mu-s", type=float, default=10.0)
    args = ap.parse_args()
    problem = interface_demo_problem(args.N, mu_s=args.mu_s)
    rows = contraction_sweep(args.etas, problem)
    print(sweep_csv(rows, f"{args.N}x{args.N}"), end="")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
