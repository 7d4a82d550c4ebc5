"""Command-line experiment runner.

Stages, in order: generate, estimate, predict, optimize, evaluate.  Each
subcommand runs its stage and the stages it depends on; ``all`` runs every
stage.  Outputs land in one directory together with ``manifest.json``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import platform
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .cascade import CascadeConfig
from .config import ExperimentConfig, load_config
from .coupling import build_coupled_network
from .errors import CPSRiskError, ConfigurationError, StageError
from .evaluation import EvaluationConfig, ResidualReport, evaluate_region
from .markov_model import (AsymptoticTable, RecoveryProfile, arbitrate_reading, asymptotic_probabilities,
                           estimate_profile, fixed_transfer_probability, fmt, region_probability)
from .network_model import CoupledNetwork, Region
from .optimizer import OptimizeResult, OptimizerConfig, RegionFitness, optimize
from .oracle import run_cascades
from .regions import AdmissibleCounts

log = logging.getLogger(__name__)

STAGES = ("generate", "estimate", "predict", "optimize", "evaluate")
ALGORITHMS = ("gwo", "cagwo")
PLAN = {
    "generate": ("generate",),
    "estimate": ("generate", "estimate"),
    "predict": ("generate", "estimate", "predict"),
    "optimize": ("generate", "estimate", "optimize"),
    "evaluate": ("generate", "estimate", "evaluate"),
    "all": STAGES,
}


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _ids(region: Region) -> tuple[str, str]:
    return " ".join(map(str, sorted(region.cyber))), " ".join(map(str, sorted(region.physical)))


def _sub_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([seed, *key]).generate_state(1)[0])


class Experiment:
    """Lazily computed stage results for one configuration."""

    def __init__(self, cfg: ExperimentConfig, out: Path | None = None):
        self.cfg = cfg
        self.out = Path(out if out is not None else cfg.out)
        self.files: dict[str, str] = {}
        self.done: list[str] = []
        self._net: CoupledNetwork | None = None
        self._profile: RecoveryProfile | None = None
        self._table: AsymptoticTable | None = None
        self._counts: AdmissibleCounts | None = None
        self._runs: dict[str, OptimizeResult] = {}

    # -- helpers -----------------------------------------------------------
    def write(self, name: str, text: str) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(text)
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()

    def stage(self, name: str, fn: Callable[[], None]) -> None:
        if name in self.done:
            return
        try:
            fn()
        except StageError:
            raise
        except Exception as exc:  # every failure is reported with its stage
            raise StageError(name, exc) from exc
        self.done.append(name)

    @property
    def grid(self) -> int:
        return max(self.cfg.predict.max_size, self.cfg.optimizer.max_region_size, *self.cfg.evaluate.sizes)

    def cascade_config(self) -> CascadeConfig:
        c = self.cfg.cascade
        return CascadeConfig(c.failure_mode, c.control_trip_prob)

    # -- stages ------------------------------------------------------------
    def generate(self) -> None:
        def run():
            t = self.cfg.topology
            if t.physical == "file":
                if not t.physical_file or not Path(t.physical_file).is_file():
                    raise ConfigurationError(f"topology file {t.physical_file!r} does not exist")
                source = Path(t.physical_file).read_text()
            else:
                source = t.physical
            self._net = build_coupled_network(
                source, None, self.cfg.params, cyber_nodes=t.cyber_nodes, m0=t.m0, m=t.m,
                seed=_sub_seed(self.cfg.seed, 1), control_fraction=t.control_fraction,
                backup_fraction=t.backup_fraction)
            net = self._net
            self.write("network_summary.json", json.dumps(net.summary(), indent=2, sort_keys=True) + "\n")
            self.write("coupling.txt", net.coupling.to_text())
            self.write("physical_edges.txt", "".join(f"{a} {b}\n" for a, b in net.physical.edges))
            self.write("cyber_edges.txt", "".join(f"{a} {b}\n" for a, b in net.cyber.edges))
        self.stage("generate", run)

    @property
    def net(self) -> CoupledNetwork:
        self.generate()
        assert self._net is not None
        return self._net

    def estimate(self) -> None:
        net = self.net

        def run():
            pc = self.cfg.profile
            n = self.grid
            reading = pc.reading
            if pc.source == "estimate":
                freq, traces = run_cascades(net, None, pc.runs, _sub_seed(self.cfg.seed, 2),
                                            self.cascade_config(), keep_traces=True)
                profile = estimate_profile(traces, n, n, floor=pc.floor)
                if reading == "auto":
                    reading, scores = arbitrate_reading(profile, traces, n, n)
                    self.write("reading.json", json.dumps(
                        {"reading": reading, "discrepancy": {k: fmt(v) for k, v in scores.items()}},
                        indent=2, sort_keys=True) + "\n")
                self.write("region_frequencies.csv", freq.to_csv())
            elif pc.source == "parametric":
                profile = RecoveryProfile.parametric(x_max=n, y_max=n, **pc.parametric)
            elif pc.source == "file":
                if not pc.path or not Path(pc.path).is_file():
                    raise ConfigurationError(f"profile file {pc.path!r} does not exist")
                profile = RecoveryProfile.from_json(Path(pc.path).read_text())
            else:
                raise ConfigurationError(f"unknown profile source {pc.source!r}")
            if reading == "auto":
                reading = "verbatim"
            self._profile = profile
            self._table = asymptotic_probabilities(profile, n, n, reading=reading)
            self.write("profile.json", profile.to_json() + "\n")
            self.write("asymptotic_table.csv", self._table.to_csv())
        self.stage("estimate", run)

    @property
    def table(self) -> AsymptoticTable:
        self.estimate()
        assert self._table is not None
        return self._table

    @property
    def counts(self) -> AdmissibleCounts:
        if self._counts is None:
            p = self.cfg.predict
            self._counts = AdmissibleCounts.for_network(self.net, self.grid, p.exact_limit, p.count_walks,
                                                        _sub_seed(self.cfg.seed, 3))
        return self._counts

    def predict(self) -> None:
        table = self.table

        def run():
            p = self.cfg.predict
            rows = []
            for size in range(p.min_size, p.max_size + 1):
                base = fixed_transfer_probability(size, p.baseline_rate, p.mean_degree)
                for y in range(size, 0, -1):
                    x = size - y
                    n = self.counts.get(x, y)
                    cell = table.absorb(x, y)
                    region = cell / n if n > 0 else 0.0
                    rows.append([size, y, x, fmt(n), fmt(cell), fmt(region), fmt(base)])
            self.write("table1.csv", _csv(
                ["size", "cyber_count", "physical_count", "admissible_regions", "split_probability",
                 "dependent_markov", "fixed_transfer"], rows))
            self.write("comparison.csv", compare_models(self.out))
        self.stage("predict", run)

    def fitness(self, max_size: int, exact_size: bool) -> RegionFitness:
        o = self.cfg.optimizer
        e = self.cfg.evaluate
        ecfg = EvaluationConfig(strict_control=e.strict_control, measure=e.measure)
        net, table, counts = self.net, self.table, self.counts

        def impact(r: Region) -> tuple[float, float]:
            rep = evaluate_region(net, r, ecfg)
            return rep.r_max, rep.eta

        return RegionFitness(net, lambda r: region_probability(r, table, net, counts), impact,
                             o.w1, o.w2, max_size, exact_size)

    def optimizer_config(self, algorithm: str, max_iter: int | None = None) -> OptimizerConfig:
        o = self.cfg.optimizer
        kw = dict(pack_size=o.pack_size, max_iter=max_iter or o.max_iter, omega=o.omega, eta=o.eta,
                  stagnation=o.stagnation, patience=o.patience, center=o.center, threads=self.cfg.threads)
        return OptimizerConfig.gwo(**kw) if algorithm == "gwo" else OptimizerConfig.cagwo(**kw)

    def optimize(self) -> None:
        self.estimate()

        def run():
            rows = []
            for k, alg in enumerate(ALGORITHMS):
                fit = self.fitness(self.cfg.optimizer.max_region_size, False)
                res = optimize(fit, self.net.n_total, self.optimizer_config(alg), _sub_seed(self.cfg.seed, 4, k))
                self._runs[alg] = res
                self.write(f"convergence_{alg}.csv", res.history_csv())
                region = fit.region(res.best.position)
                c, p = _ids(region)
                rows.append([alg, c, p, region.size, fmt(res.best.fitness), res.iterations])
            self.write("best_regions.csv", _csv(
                ["algorithm", "cyber_ids", "physical_ids", "region_size", "fitness", "iterations"], rows))
        self.stage("optimize", run)

    def evaluate(self) -> None:
        self.estimate()

        def run():
            e = self.cfg.evaluate
            ecfg = EvaluationConfig(strict_control=e.strict_control, measure=e.measure)
            for k, alg in enumerate(ALGORITHMS):
                rows = []
                for s in e.sizes:
                    fit = self.fitness(s, True)
                    res = optimize(fit, self.net.n_total, self.optimizer_config(alg, e.max_iter),
                                   _sub_seed(self.cfg.seed, 5, k, s))
                    rep = evaluate_region(self.net, fit.region(res.best.position), ecfg)
                    rows.append(rep.csv_row())
                self.write(f"residual_{alg}.csv", _csv(ResidualReport.CSV_HEADER, rows))
        self.stage("evaluate", run)

    def manifest(self) -> None:
        doc = {
            "seed": self.cfg.seed,
            "config_hash": self.cfg.hash(),
            "config": self.cfg.to_dict() | {"out": None},
            "stages": self.done,
            "versions": {
                "cpsrisk": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
            "files": dict(sorted(self.files.items())),
        }
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None, until: str = "all") -> Path:
    """Run the stages a subcommand needs and write the bundle."""
    exp = Experiment(cfg, Path(out) if out is not None else None)
    for name in PLAN[until]:
        getattr(exp, name)()
    exp.manifest()
    return exp.out


def compare_models(bundle: str | Path) -> str:
    """Side-by-side dependent-Markov vs fixed-baseline rows from a bundle's table1.csv."""
    path = Path(bundle) / "table1.csv"
    header = ["size", "cyber_count", "physical_count", "dependent_markov", "fixed_transfer"]
    rows = []
    if path.is_file():
        for r in csv.DictReader(path.read_text().splitlines()):
            rows.append([r[h] for h in header])
    rows.sort(key=lambda r: (int(r[0]), -int(r[1])))
    return _csv(header, rows)


def verify_manifest(bundle: str | Path) -> list[str]:
    """Files whose digest no longer matches the manifest."""
    bundle = Path(bundle)
    doc = json.loads((bundle / "manifest.json").read_text())
    bad = []
    for name, digest in doc["files"].items():
        p = bundle / name
        if not p.is_file() or hashlib.sha256(p.read_bytes()).hexdigest() != digest:
            bad.append(name)
    return bad


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cpsrisk", description="Risk-region experiments on coupled CPS networks")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "all"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML file or built-in name (ieee39-ba110)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--threads", type=int)
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, out=args.out)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigurationError("--threads must be >= 1")
            cfg = replace(cfg, threads=args.threads)
    except CPSRiskError as exc:
        print(f"error: stage 'config' failed: {exc}", file=sys.stderr)
        return 2
    try:
        out = run_experiment(cfg, until=args.command)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
