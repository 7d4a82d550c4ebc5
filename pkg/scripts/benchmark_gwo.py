"""Classic GWO against CAGWO on the sphere and Rastrigin benchmarks (30-D).

Writes one row per (function, algorithm, seed) and prints medians with a
one-sided sign test on paired seeds.
"""
import argparse
import csv

import numpy as np
from scipy.stats import binomtest

from cpsrisk.optimizer import BENCHMARK_CENTER, OptimizerConfig, optimize, rastrigin, sphere


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=30)
    ap.add_argument("--dim", type=int, default=30)
    ap.add_argument("--center", type=float, default=BENCHMARK_CENTER)
    ap.add_argument("--out", default="benchmark_gwo.csv")
    args = ap.parse_args()
    rows = []
    for name, f in (("sphere", sphere), ("rastrigin", rastrigin)):
        res = {}
        for alg in ("gwo", "cagwo"):
            cfg = getattr(OptimizerConfig, alg)(center=args.center)
            vals = []
            for seed in range(args.seeds):
                r = optimize(lambda x: -f(x), args.dim, cfg, rng_seed=seed, vectorized=True)
                vals.append(-r.best.fitness)
                rows.append([name, alg, seed, f"{-r.best.fitness:.6e}", r.iterations])
            res[alg] = np.array(vals)
        wins = int(np.sum(res["cagwo"] < res["gwo"]))
        losses = int(np.sum(res["cagwo"] > res["gwo"]))
        p = binomtest(wins, wins + losses, alternative="greater").pvalue if wins + losses else 1.0
        print(f"{name}: median gwo {np.median(res['gwo']):.3e} cagwo {np.median(res['cagwo']):.3e} "
              f"wins {wins} losses {losses} sign-test p {p:.3f}")
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["function", "algorithm", "seed", "best_value", "iterations"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
