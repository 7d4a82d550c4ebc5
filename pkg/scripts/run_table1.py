"""Incidence probabilities per region size and split on the IEEE-39 / BA-110 system.

    python scripts/run_table1.py --out results/table1 [--config my.yaml]
"""
import argparse
import csv
from pathlib import Path

from cpsrisk.cli import run_experiment
from cpsrisk.config import load_config


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="ieee39-ba110")
    ap.add_argument("--out", default="results/table1")
    args = ap.parse_args()
    out = run_experiment(load_config(args.config), Path(args.out), until="predict")
    with open(out / "table1.csv") as fh:
        rows = list(csv.DictReader(fh))
    print(f"{'size':>4} {'cyber':>5} {'phys':>4} {'markov':>12} {'fixed':>12}")
    for r in rows:
        print(f"{r['size']:>4} {r['cyber_count']:>5} {r['physical_count']:>4} "
              f"{float(r['dependent_markov']):12.4e} {float(r['fixed_transfer']):12.4e}")


if __name__ == "__main__":
    main()
