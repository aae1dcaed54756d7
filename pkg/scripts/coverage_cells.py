"""Coverage and width of the three interval methods for two benchmark cells.

Usage: python3 scripts/coverage_cells.py [--reps 500] [--B 1000] [--seed 2010] [--out DIR]
"""

import argparse
import time
from pathlib import Path

from pointimpact.harness import ExperimentConfig, emit_report, run_coverage_experiment

CELLS = [dict(n=20, sigma=0.3, H=0.5), dict(n=40, sigma=0.5, H=0.7)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=500)
    ap.add_argument("--B", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2010)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cell in CELLS:
        cfg = ExperimentConfig(**cell, outer_reps=args.reps, boot_B=args.B, seed=args.seed)
        t0 = time.perf_counter()
        rows = run_coverage_experiment(cfg, workers=args.workers)
        name = f"cell_n{cfg.n}_H{cfg.H}.csv"
        emit_report(rows, "csv", out / name)
        print(f"n={cfg.n} sigma={cfg.sigma} H={cfg.H}  ({time.perf_counter() - t0:.0f} s)")
        for r in rows:
            print(f"  {r.method:<13} coverage {r.coverage:.3f} (se {r.mc_standard_error:.3f})  width {r.avg_width:.3f}")


if __name__ == "__main__":
    main()
