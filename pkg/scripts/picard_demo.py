"""Picard iteration for the coupled problem from small initial data."""

import argparse

from growthfsi.coupling import CouplingParams, PicardDivergence, picard_solve, small_initial_data
from growthfsi.geometry import build_reference_domain


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=32)
    ap.add_argument("--T", type=float, default=0.1)
    ap.add_argument("--nsteps", type=int, default=10)
    ap.add_argument("--amplitude", type=float, default=1e-2)
    args = ap.parse_args()
    grid = build_reference_domain(1.0, 0.5, args.N, args.N)
    v0, c0 = small_initial_data(grid, args.amplitude)
    try:
        res = picard_solve(grid, v0, c0, args.T, CouplingParams(), nsteps=args.nsteps)
    except PicardDivergence as exc:
        print(exc)
        print(exc.history.to_csv(), end="")
        return 4
    print(res.history.to_csv(), end="")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
