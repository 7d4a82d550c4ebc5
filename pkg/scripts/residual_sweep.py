"""Residual connectivity and load loss after the worst region found by each optimizer.

Runs the full pipeline and prints the two residual curves side by side.
"""
import argparse
import csv
from pathlib import Path

from cpsrisk.cli import run_experiment
from cpsrisk.config import load_config


def read(path: Path) -> dict[int, tuple[float, float]]:
    with open(path) as fh:
        return {int(r["region_size"]): (float(r["r_max"]), float(r["eta"])) for r in csv.DictReader(fh)}


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="ieee39-ba110")
    ap.add_argument("--out", default="results/residual")
    args = ap.parse_args()
    out = run_experiment(load_config(args.config), Path(args.out))
    g, c = read(out / "residual_gwo.csv"), read(out / "residual_cagwo.csv")
    print(f"{'size':>4} {'gwo R_max':>10} {'cagwo R_max':>11} {'gwo eta':>8} {'cagwo eta':>9}")
    for s in sorted(g):
        print(f"{s:>4} {g[s][0]:10.4f} {c[s][0]:11.4f} {g[s][1]:8.4f} {c[s][1]:9.4f}")


if __name__ == "__main__":
    main()
