"""Run every sample config under scripts/configs and write a combined report."""

import argparse
from pathlib import Path

from growthfsi.cli import emit_report, run_scenario

HERE = Path(__file__).resolve().parent


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--output-root", default="runs")
    args = ap.parse_args()
    for cfg in sorted((HERE / "configs").glob("*.cfg")):
        res = run_scenario(cfg.read_text(), args.output_root)
        print(f"{cfg.name:24s} status {res.status}  {res.message}")
    txt, tab = emit_report(args.output_root)
    print(f"report: {txt}, {tab}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
