#!/usr/bin/env python3
"""Run the replicated synthetic benchmarks and write one CSV per setting.

Reproduces the structure of the simulation tables: both examples, three
noise levels, both criteria, both solver routes. Desk-scale defaults keep the
full matrix to minutes; pass --full for the full-scale configuration
(100 replications, n = 500 and 1000), which takes correspondingly longer.

Usage:
    python scripts/run_benchmarks.py --outdir results [--workers 4] [--full]
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from trendfilter import io
from trendfilter.simulate import ExperimentConfig, example1, example2, run_experiment

SNR_LEVELS = {"low": 1e4, "medium": 400.0, "high": 25.0}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--outdir", default="benchmark_results")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=20240901)
    ap.add_argument("--full", action="store_true",
                    help="100 reps at n=500 and n=1000 (long)")
    ap.add_argument("--tol-kink", type=float, default=1e-4, dest="tol_kink",
                    help="relative threshold for counting a slope change as a kink "
                         "(reported with the results)")
    args = ap.parse_args()
    os.makedirs(args.outdir, exist_ok=True)

    reps = 100 if args.full else args.reps
    sizes = (500, 1000) if args.full else (500,)
    matrix = []
    for n in sizes:
        for name, preset in (("example1", example1), ("example2", example2)):
            for level, snr in SNR_LEVELS.items():
                for criterion in ("sic", "mc"):
                    matrix.append((name, preset(n=n), snr, criterion, "pathwise"))
                matrix.append((name, preset(n=n), snr, "mc", "lasso"))

    for name, spec, snr, criterion, solver in matrix:
        cfg = ExperimentConfig(example=name, spec=spec, snr=snr, replications=reps,
                               criterion=criterion, solver=solver, base_seed=args.seed,
                               tol_kink=args.tol_kink)
        result = run_experiment(cfg, workers=args.workers)
        tag = f"{name}_n{spec.n}_snr{snr:g}_{criterion}_{solver}"
        out = os.path.join(args.outdir, tag + ".csv")
        io.write_experiment_csv(out, result, args_echo=tag)
        io.write_experiment_metadata(out + ".meta.json", result, args_echo=tag)
        a = result.aggregate
        print(f"{tag}: RE={a['re_mean']:.4f} |J|={a['j_count_mean']:.2f} "
              f"eAB={a['e_ab_mean']:.3f} eBA={a['e_ba_mean']:.3f} "
              f"S^n={a['sn_freq']:.2f} flagged={result.flagged}")


if __name__ == "__main__":
    main()
