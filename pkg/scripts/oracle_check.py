"""Markov region probabilities against exact enumeration on small random systems.

For every region above --min-prob, prints the exact probability, the Monte
Carlo estimate, the model value and the gap in Monte Carlo standard errors.
"""
import argparse
import math

from cpsrisk.markov_model import arbitrate_reading, asymptotic_probabilities, estimate_profile, region_probability
from cpsrisk.oracle import exhaustive_regions, monte_carlo_regions, toy_system
from cpsrisk.regions import AdmissibleCounts


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--systems", type=int, default=6)
    ap.add_argument("--runs", type=int, default=100_000)
    ap.add_argument("--min-prob", type=float, default=1e-3)
    args = ap.parse_args()
    for seed in range(args.systems):
        net = toy_system(5, 7, seed=seed)
        exact = exhaustive_regions(net)
        mc, traces = monte_carlo_regions(net, runs=args.runs, seed=100 + seed, keep_traces=True)
        profile = estimate_profile(traces, net.n_physical, net.n_cyber, floor=0.01)
        reading, _ = arbitrate_reading(profile, traces[:5000], net.n_physical, net.n_cyber)
        table = asymptotic_probabilities(profile, net.n_physical, net.n_cyber, reading=reading)
        counts = AdmissibleCounts.for_network(net, net.n_total)
        print(f"system {seed} ({reading})")
        for region, p in sorted(exact.probabilities.items(), key=lambda kv: -kv[1]):
            if p < args.min_prob:
                continue
            model = region_probability(region, table, net, counts)
            se = mc.stderr(region) or math.sqrt(p * (1 - p) / args.runs)
            print(f"  {str(region):<28} exact {p:.4f} mc {mc.get(region):.4f} model {model:.3e} "
                  f"gap {abs(model - p) / se:7.1f} SE")


if __name__ == "__main__":
    main()
