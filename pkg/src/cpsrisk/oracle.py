"""Ground truth for small systems: Monte Carlo region frequencies and exact
enumeration of the cascade's branch tree."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .cascade import CascadeConfig, CascadeModel
from .coupling import build_coupled_network
from .errors import SizeBoundError
from .network_model import CoupledNetwork, LayerParams, NodeId, Region, Topology, cyber

EXHAUSTIVE_NODE_CAP = 12

FaultSpec = Mapping[Region, float] | Sequence[Region] | None


def _fault_distribution(net: CoupledNetwork, faults: FaultSpec) -> list[tuple[Region, float]]:
    """Normalised list of (initial region, weight); default uniform over cyber nodes."""
    if faults is None:
        items = [(Region.of([cyber(j)]), 1.0) for j in range(net.n_cyber)]
    elif isinstance(faults, Mapping):
        items = [(r, float(w)) for r, w in faults.items() if w > 0]
    else:
        items = [(r, 1.0) for r in faults]
    total = sum(w for _, w in items)
    if not items or total <= 0:
        raise ValueError("initial fault distribution is empty")
    return [(r, w / total) for r, w in items]


def probabilistic(config: CascadeConfig | None) -> CascadeConfig:
    base = config or CascadeConfig()
    return replace(base, failure_mode="probabilistic")


@dataclass
class RegionFrequencyTable:
    """Terminal failed sets with their probability (estimated or exact)."""

    probabilities: dict[Region, float]
    runs: int | None  # None for exact tables
    residual: float = 0.0  # truncated cascades

    def stderr(self, region: Region) -> float:
        if self.runs is None:
            return 0.0
        f = self.probabilities.get(region, 0.0)
        return math.sqrt(f * (1.0 - f) / self.runs)

    def get(self, region: Region) -> float:
        return self.probabilities.get(region, 0.0)

    def by_split(self) -> dict[tuple[int, int], float]:
        """Probability mass per (physical count, cyber count)."""
        out: dict[tuple[int, int], float] = {}
        for r, p in self.probabilities.items():
            y, x = r.split
            out[(x, y)] = out.get((x, y), 0.0) + p
        return out

    def rows(self) -> list[tuple[Region, float]]:
        return sorted(self.probabilities.items(), key=lambda kv: (-kv[1], kv[0].size, str(kv[0])))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cyber_ids", "physical_ids", "probability", "stderr"])
        for r, p in self.rows():
            w.writerow([" ".join(str(i) for i in sorted(r.cyber)),
                        " ".join(str(i) for i in sorted(r.physical)),
                        f"{p:.5e}", f"{self.stderr(r):.5e}"])
        return buf.getvalue()


def monte_carlo_regions(net: CoupledNetwork, faults: FaultSpec = None, runs: int = 10000, seed: int = 0,
                        config: CascadeConfig | None = None, max_steps: int | None = None,
                        keep_traces: bool = False) -> tuple[RegionFrequencyTable, list]:
    """Frequencies of terminal regions over ``runs`` cascades.

    Node failures are probabilistic unless ``config`` says otherwise
    explicitly through :func:`run_cascades`.  Returns the table and the
    traces (empty unless ``keep_traces``).
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    return run_cascades(net, faults, runs, seed, probabilistic(config), max_steps, keep_traces)


def run_cascades(net: CoupledNetwork, faults: FaultSpec, runs: int, seed: int, config: CascadeConfig,
                 max_steps: int | None = None, keep_traces: bool = False) -> tuple[RegionFrequencyTable, list]:
    dist = _fault_distribution(net, faults)
    model = CascadeModel(net, config)
    rng = np.random.default_rng(seed)
    weights = np.array([w for _, w in dist])
    picks = rng.choice(len(dist), size=runs, p=weights) if len(dist) > 1 else np.zeros(runs, dtype=int)
    counts: dict[Region, int] = {}
    truncated = 0
    traces = []
    for k in picks:
        tr = model.simulate(dist[int(k)][0].nodes(), rng, max_steps)
        if keep_traces:
            traces.append(tr)
        if tr.truncated:
            truncated += 1
            continue
        r = tr.region
        counts[r] = counts.get(r, 0) + 1
    probs = {r: c / runs for r, c in counts.items()}
    return RegionFrequencyTable(probs, runs, truncated / runs), traces


def exhaustive_regions(net: CoupledNetwork, faults: FaultSpec = None, config: CascadeConfig | None = None,
                       node_cap: int = EXHAUSTIVE_NODE_CAP) -> RegionFrequencyTable:
    """Exact terminal-region probabilities by walking every branch of the cascade."""
    if net.n_total > node_cap:
        raise SizeBoundError(f"exhaustive enumeration is limited to {node_cap} nodes, got {net.n_total}")
    model = CascadeModel(net, probabilistic(config))
    probs: dict[Region, float] = {}
    for region, w in _fault_distribution(net, faults):
        stack = [(model.initial_state(region.nodes()), w)]
        while stack:
            state, p = stack.pop()
            if state.K == 0:
                r = state.failed()
                probs[r] = probs.get(r, 0.0) + p
                continue
            ev = model.events(state)
            if ev.empty:
                r = state.failed()
                probs[r] = probs.get(r, 0.0) + p
                continue
            for outcome, q in model.outcomes(ev):
                nxt = model.step(state, outcome=outcome)
                stack.append((nxt, p * q))
    return RegionFrequencyTable(probs, None, 0.0)


def _random_connected(n: int, extra: int, rng: np.random.Generator) -> Topology:
    edges = [(int(rng.integers(i)), i) for i in range(1, n)]
    have = {tuple(sorted(e)) for e in edges}
    tries = 0
    while extra > 0 and tries < 100:
        tries += 1
        a, b = sorted(int(v) for v in rng.choice(n, 2, replace=False))
        if (a, b) not in have:
            have.add((a, b))
            edges.append((a, b))
            extra -= 1
    return Topology.from_edges(n, edges)


def toy_system(n_physical: int = 5, n_cyber: int = 7, seed: int = 0, params: LayerParams | None = None,
               control_fraction: float = 0.3) -> CoupledNetwork:
    """Small random coupled system: tree-plus-chords grid, small BA cyber layer."""
    rng = np.random.default_rng(seed)
    phys = _random_connected(n_physical, max(1, n_physical // 3), rng)
    cyb = _random_connected(n_cyber, max(1, n_cyber // 2), rng)
    return build_coupled_network(phys, cyb, params, seed=int(rng.integers(2**31)),
                                 control_fraction=control_fraction)
