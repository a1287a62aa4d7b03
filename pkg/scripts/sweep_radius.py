#!/usr/bin/env python3
"""Completion time and per-module success versus exploration radius.

Runs the seeded sweep on a scenario and prints one row per radius.
"""
from __future__ import annotations

import argparse

import numpy as np

from semexplore.sim.batch import SUMMARY_MODULES, run_sweep, summarize_rows
from semexplore.sim.scenario import load


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default="scenarios/default.json")
    ap.add_argument("--radii", default="2.5,5,7.5,10")
    ap.add_argument("--episodes", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    radii = [float(r) for r in args.radii.split(",")]
    rows = run_sweep(load(args.scenario), radii, args.episodes, args.seed, workers=args.workers)
    print(f"{'R_e':>5} {'q1':>7} {'median':>7} {'q3':>7}  " + " ".join(f"{m[:5]:>6}" for m in SUMMARY_MODULES)
          + "  overall")
    for r in radii:
        sub = [row for row in rows if row["R_e"] == r]
        s = summarize_rows(sub)
        q1, med, q3 = np.percentile([row["sim_time_s"] for row in sub], [25, 50, 75])
        print(f"{r:5.1f} {q1:7.1f} {med:7.1f} {q3:7.1f}  "
              + " ".join(f"{s.module_sr[m]:6.0f}" for m in SUMMARY_MODULES) + f"  {s.overall_sr:7.0f}")


if __name__ == "__main__":
    main()
