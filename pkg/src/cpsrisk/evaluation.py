"""Residual-network metrics after excising a region: R_max and load loss."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cascade import CascadeConfig, CascadeModel, SystemState
from .errors import UndefinedMetricError
from .network_model import CoupledNetwork, Region


@dataclass(frozen=True)
class EvaluationConfig:
    cascade: bool = True
    # physical nodes also need a working controller to count as functional
    strict_control: bool = False
    measure: str = "pairs"  # or "edges"
    control_trip_prob: float = 0.0

    def cascade_config(self) -> CascadeConfig:
        return CascadeConfig("deterministic", self.control_trip_prob)


@dataclass
class ResidualReport:
    region: Region
    r_max: float
    eta: float
    component_sizes: list[int] = field(default_factory=list)

    def csv_row(self) -> list[str]:
        y, x = self.region.split
        return [str(self.region.size), str(y), str(x), f"{self.r_max:.5e}", f"{self.eta:.5e}"]

    CSV_HEADER = ("region_size", "cyber_count", "physical_count", "r_max", "eta")


def components(adj: Sequence[Sequence[int]], keep: Sequence[bool]) -> list[list[int]]:
    """Connected components of the subgraph induced by ``keep``, largest first."""
    seen = [False] * len(adj)
    comps = []
    for s in range(len(adj)):
        if not keep[s] or seen[s]:
            continue
        seen[s] = True
        comp = [s]
        stack = [s]
        while stack:
            for w in adj[stack.pop()]:
                if keep[w] and not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    stack.append(w)
        comps.append(sorted(comp))
    comps.sort(key=lambda c: (-len(c), c[0]))
    return comps


def pair_connectivity(size: int, total: int) -> float:
    """Share of ordered node pairs joined inside a component of ``size``."""
    if total < 2:
        return 0.0
    return size * (size - 1) / (total * (total - 1))


def mutual_component(net: CoupledNetwork, alive: Sequence[bool], strict_control: bool = False) -> list[list[int]]:
    """Components of working nodes with cross-layer support inside the same component.

    Flat indices (cyber first).  A cyber node needs its supplier in its own
    component; in strict mode a physical node also needs its governor there.
    Pruning repeats until nothing changes.
    """
    nc = net.n_cyber
    adj = [[net.flat(v) for v in nbrs] for nbrs in net.union_adj]
    keep = list(alive)
    supplier = net.coupling.supplier
    governor = net.coupling.governor
    while True:
        comps = components(adj, keep)
        label = [-1] * len(adj)
        for k, c in enumerate(comps):
            for v in c:
                label[v] = k
        changed = False
        for j in range(nc):
            if keep[j] and label[nc + supplier[j]] != label[j]:
                keep[j] = False
                changed = True
        if strict_control:
            for i in range(net.n_physical):
                g = governor[i]
                if keep[nc + i] and g >= 0 and label[g] != label[nc + i]:
                    keep[nc + i] = False
                    changed = True
        if not changed:
            return comps


def residual_state(net: CoupledNetwork, region: Region, config: EvaluationConfig | None = None,
                   rng_seed: int = 0) -> SystemState:
    cfg = config or EvaluationConfig()
    model = CascadeModel(net, cfg.cascade_config())
    if region.size == 0:
        return model.intact_state()
    if not cfg.cascade:
        s = model.initial_state(region.nodes())
        s.K = 0
        return s
    return model.simulate(region.nodes(), rng_seed).terminal


def max_connectivity(net: CoupledNetwork, region: Region, config: EvaluationConfig | None = None) -> float:
    return evaluate_region(net, region, config).r_max


def load_loss(before: float | SystemState, after: float | SystemState) -> float:
    """Fraction of load lost between two states (positive = lost)."""
    b = before.alive_physical_load if isinstance(before, SystemState) else float(before)
    a = after.alive_physical_load if isinstance(after, SystemState) else float(after)
    if b == 0:
        raise UndefinedMetricError("load before excision is zero")
    return (b - a) / b


def evaluate_region(net: CoupledNetwork, region: Region, config: EvaluationConfig | None = None) -> ResidualReport:
    """Excise ``region``, let the cascade settle, and score the residual network.

    Load loss compares served demand: the initial load of physical nodes in
    the functional giant component against the full initial load.
    """
    cfg = config or EvaluationConfig()
    state = residual_state(net, region, cfg)
    alive = list(state.c_alive) + list(state.p_alive)
    comps = mutual_component(net, alive, cfg.strict_control)
    sizes = [len(c) for c in comps]
    giant = comps[0] if comps else []
    if cfg.measure == "pairs":
        r = pair_connectivity(len(giant), net.n_total)
    elif cfg.measure == "edges":
        members = set(giant)
        adj = net.union_adj
        inside = sum(1 for u in giant for w in adj[u] if net.flat(w) in members) // 2
        total = sum(len(a) for a in adj) // 2
        r = inside / total if total else 0.0
    else:
        raise ValueError(f"unknown measure {cfg.measure!r}")
    load0 = np.asarray(net.physical_load0, dtype=float)
    nc = net.n_cyber
    served = sum(load0[v - nc] for v in giant if v >= nc)
    eta = load_loss(float(load0.sum()), served)
    return ResidualReport(region, r, min(1.0, max(0.0, eta)), sizes)
