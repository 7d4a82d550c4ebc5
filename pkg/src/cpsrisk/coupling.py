"""Non-uniform interdependence between the layers.

Cyber nodes are balls, physical nodes are bins.  A bin's capacity grows with
its initial load, and balls land in bins with probability proportional to the
bin's degree-class frequency times its load.  Full bins are rejected.
"""
from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import AllocationInfeasibleError, ConfigurationError, NoCapacityError, ValidationError
from .network_model import (
    CoupledNetwork,
    CyberRole,
    LayerParams,
    PhysicalRole,
    Topology,
    load_physical_topology,
    generate_ba_cyber,
)

BRANCH_KINDS = ("power", "control", "monitor")


@dataclass(frozen=True)
class CouplingMap:
    """Cross-layer links.

    ``supplier[c]`` is the physical node powering cyber node ``c``;
    ``governor[p]`` is the control-role cyber node governing physical node
    ``p`` (-1 when there is no control node at all).  Monitor links tie each
    monitor-role cyber node to the physical node it is co-located with (its
    supplier).
    """

    supplier: tuple[int, ...]
    governor: tuple[int, ...]
    monitors: tuple[tuple[int, int], ...] = ()

    def links(self) -> list[tuple[int, int]]:
        """Distinct (cyber, physical) pairs joined by any branch."""
        pairs = {(c, p) for c, p in enumerate(self.supplier)}
        pairs.update((c, p) for p, c in enumerate(self.governor) if c >= 0)
        pairs.update(self.monitors)
        return sorted(pairs)

    def branch_count(self) -> int:
        return len(self.links())

    def branches(self) -> list[tuple[int, int, str]]:
        rows = [(c, p, "power") for c, p in enumerate(self.supplier)]
        rows += [(c, p, "control") for p, c in enumerate(self.governor) if c >= 0]
        rows += [(c, p, "monitor") for c, p in self.monitors]
        return sorted(rows, key=lambda r: (r[0], r[1], BRANCH_KINDS.index(r[2])))

    def supplied_by(self, p: int) -> list[int]:
        return [c for c, s in enumerate(self.supplier) if s == p]

    def governed_by(self, c: int) -> list[int]:
        return [p for p, g in enumerate(self.governor) if g == c]

    def to_text(self) -> str:
        lines = ["# cyber_id physical_id branch_kind"]
        lines += [f"{c} {p} {kind}" for c, p, kind in self.branches()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n_cyber: int, n_physical: int) -> "CouplingMap":
        supplier = [-1] * n_cyber
        governor = [-1] * n_physical
        monitors = []
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                c_s, p_s, kind = line.split()
                c, p = int(c_s), int(p_s)
            except ValueError:
                raise ValidationError(f"line {line_no}: expected 'cyber_id physical_id kind'") from None
            if kind == "power":
                supplier[c] = p
            elif kind == "control":
                governor[p] = c
            elif kind == "monitor":
                monitors.append((c, p))
            else:
                raise ValidationError(f"line {line_no}: unknown branch kind {kind!r}")
        if min(supplier, default=0) < 0:
            raise ValidationError("every cyber node needs a power branch")
        return cls(tuple(supplier), tuple(governor), tuple(sorted(monitors)))


# ---------------------------------------------------------------------------
# capacity and allocation probabilities

def max_support(load: float, beta: float = 1.0, mu: float = 1.0) -> int:
    """Most cyber nodes a physical node with ``load`` can power (floored)."""
    if load < 0:
        raise ValueError("load must be non-negative")
    v = beta * load ** mu
    # guard against 15.9999999 from float powers
    return max(0, math.floor(v + 1e-9 * max(1.0, abs(v))))


def degree_distribution(topo: Topology) -> dict[int, float]:
    counts = Counter(int(d) for d in topo.degrees)
    return {k: counts[k] / topo.n for k in sorted(counts)}


def mean_max_support(class_probs: Sequence[float], class_support: Sequence[float]) -> float:
    """Average capacity over degree classes, weighted by class probability."""
    pr = np.asarray(class_probs, dtype=float)
    ns = np.asarray(class_support, dtype=float)
    if pr.shape != ns.shape:
        raise ValidationError("one capacity per degree class required")
    if np.any(pr < 0) or abs(pr.sum() - 1.0) > 1e-9:
        raise ValidationError(f"degree distribution must be non-negative and sum to 1 (got {pr.sum()!r})")
    return float(np.dot(pr, ns))


def allocation_probability(class_prob: float, load: float, n_bins: int, mean_support: float) -> float:
    if mean_support <= 0:
        raise NoCapacityError("mean maximum support is zero; no bin can take a ball")
    p = class_prob * load / (n_bins * mean_support)
    return min(1.0, max(0.0, p))


def bin_probabilities(physical: Topology, params: LayerParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-bin assignment probability and per-bin capacity ``N_z``."""
    loads = params.beta * physical.degrees.astype(float) ** params.mu
    caps = np.array([max_support(L, params.beta, params.mu) for L in loads], dtype=np.int64)
    dist = degree_distribution(physical)
    pd = np.array([dist[int(d)] for d in physical.degrees])
    classes = sorted(dist)
    class_caps = []
    for k in classes:
        L = params.beta * float(k) ** params.mu
        class_caps.append(max_support(L, params.beta, params.mu))
    mean_n = mean_max_support([dist[k] for k in classes], class_caps)
    probs = np.array([allocation_probability(pd[z], loads[z], physical.n, mean_n) for z in range(physical.n)])
    return probs, caps


def place_balls(weights: Sequence[float], capacities: Sequence[int], n_balls: int,
                rng: np.random.Generator) -> np.ndarray:
    """Drop balls one at a time into bins drawn by ``weights``, skipping full bins.

    Zeroing a full bin's weight and renormalising is the same distribution as
    redrawing on rejection, without the retry loop.
    """
    w = np.asarray(weights, dtype=float).copy()
    cap = np.asarray(capacities, dtype=np.int64).copy()
    if cap.sum() < n_balls:
        raise AllocationInfeasibleError(f"total capacity {int(cap.sum())} < {n_balls} balls")
    w[cap <= 0] = 0.0
    if n_balls and w.sum() <= 0:
        raise AllocationInfeasibleError("no bin with positive weight and free capacity")
    cum = np.cumsum(w)
    u = rng.random(n_balls)
    out = np.empty(n_balls, dtype=np.int64)
    for i in range(n_balls):
        z = int(np.searchsorted(cum, u[i] * cum[-1], side="right"))
        z = min(z, len(w) - 1)
        while w[z] <= 0:  # float edge at a zero-width interval
            z -= 1
        out[i] = z
        cap[z] -= 1
        if cap[z] == 0:
            w[z] = 0.0
            cum = np.cumsum(w)
            if i + 1 < n_balls and cum[-1] <= 0:
                raise AllocationInfeasibleError("ran out of bins with positive weight")
    return out


def assign_roles(cyber_topo: Topology, control_fraction: float = 0.2) -> tuple[CyberRole, ...]:
    """Highest-degree cyber nodes become control nodes (ties: lower index)."""
    if not 0.0 <= control_fraction <= 1.0:
        raise ConfigurationError("control_fraction must lie in [0, 1]")
    k = int(round(control_fraction * cyber_topo.n))
    order = sorted(range(cyber_topo.n), key=lambda j: (-int(cyber_topo.degrees[j]), j))
    control = set(order[:k])
    return tuple(CyberRole.CONTROL if j in control else CyberRole.MONITOR for j in range(cyber_topo.n))


def _governors(physical: Topology, cyber_topo: Topology, supplier: Sequence[int],
               roles: Sequence[CyberRole]) -> tuple[int, ...]:
    nc = cyber_topo.n
    controls = {j for j, r in enumerate(roles) if r is CyberRole.CONTROL}
    if not controls:
        return tuple(-1 for _ in range(physical.n))
    # combined graph: cyber 0..nc-1, physical nc..; physical edges keep nodes
    # without any powered cyber node reachable
    nbrs: list[list[int]] = [list(a) for a in cyber_topo.adj] + [[nc + b for b in a] for a in physical.adj]
    for c, p in enumerate(supplier):
        nbrs[c].append(nc + p)
        nbrs[nc + p].append(c)
    out = []
    for p in range(physical.n):
        start = nc + p
        dist = {start: 0}
        frontier = deque([start])
        found: list[int] = []
        found_at = None
        while frontier:
            v = frontier.popleft()
            if found_at is not None and dist[v] >= found_at:
                break
            for w in nbrs[v]:
                if w in dist:
                    continue
                dist[w] = dist[v] + 1
                if w in controls:
                    found.append(w)
                    found_at = dist[w]
                frontier.append(w)
        out.append(min(found) if found else -1)
    return tuple(out)


def allocate_coupling(physical: Topology, cyber_topo: Topology, roles: Sequence[CyberRole],
                      params: LayerParams, rng_seed: int = 0) -> CouplingMap:
    probs, caps = bin_probabilities(physical, params)
    if probs.sum() <= 0:
        raise AllocationInfeasibleError("every bin has zero assignment probability")
    rng = np.random.default_rng(rng_seed)
    supplier = place_balls(probs / probs.sum(), caps, cyber_topo.n, rng)
    supplier_t = tuple(int(s) for s in supplier)
    governor = _governors(physical, cyber_topo, supplier_t, roles)
    monitors = tuple((c, supplier_t[c]) for c, r in enumerate(roles) if r is CyberRole.MONITOR)
    return CouplingMap(supplier_t, governor, monitors)


def ball_count_pmf(n_balls: int, bin_probs: Sequence[float], weights: Sequence[float] | None = None,
                   caps: Sequence[int] | None = None) -> np.ndarray:
    """Distribution of the number of balls in a bin, t = 0..n_balls.

    Each bin's count is Binomial(n_balls, P) truncated at its cap and
    renormalised; the result mixes bins (or degree classes) by ``weights``.
    """
    probs = np.asarray(bin_probs, dtype=float)
    w = np.full(len(probs), 1.0 / len(probs)) if weights is None else np.asarray(weights, dtype=float)
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValidationError("mixture weights must sum to 1")
    t = np.arange(n_balls + 1)
    out = np.zeros(n_balls + 1)
    for z, P in enumerate(probs):
        pmf = stats.binom.pmf(t, n_balls, P)
        if caps is not None:
            pmf = np.where(t <= caps[z], pmf, 0.0)
            s = pmf.sum()
            if s <= 0:
                raise ValidationError(f"bin {z}: no probability mass at or below its cap {caps[z]}")
            pmf = pmf / s
        out += w[z] * pmf
    return out


def empirical_ball_counts(assignments: Iterable[np.ndarray], n_bins: int, n_balls: int) -> np.ndarray:
    """Pooled histogram of balls-per-bin over many allocations, normalised."""
    hist = np.zeros(n_balls + 1)
    for a in assignments:
        per_bin = np.bincount(a, minlength=n_bins)
        hist += np.bincount(per_bin, minlength=n_balls + 1)[: n_balls + 1]
    return hist / hist.sum()


def build_coupled_network(physical_source: str | Topology = "ieee39", cyber_topo: Topology | None = None,
                          params: LayerParams | None = None, *, cyber_nodes: int = 110, m0: int = 3, m: int = 2,
                          seed: int = 0, control_fraction: float = 0.2, backup_fraction: float = 0.0,
                          physical_roles: Sequence[PhysicalRole] | None = None,
                          capacity_override: Sequence[float] | None = None) -> CoupledNetwork:
    """Assemble a coupled network; the defaults give the IEEE 39-BA 110 system."""
    params = params or LayerParams()
    if isinstance(physical_source, Topology):
        phys = physical_source
        roles_p = tuple(physical_roles) if physical_roles else tuple(PhysicalRole.SUBSTATION for _ in range(phys.n))
    else:
        phys, roles_p = load_physical_topology(physical_source)
        if physical_roles:
            roles_p = tuple(physical_roles)
    seeds = np.random.SeedSequence(seed).spawn(2)
    if cyber_topo is None:
        cyber_topo = generate_ba_cyber(cyber_nodes, m0, m, int(seeds[0].generate_state(1)[0]))
    roles_c = assign_roles(cyber_topo, control_fraction)
    coupling = allocate_coupling(phys, cyber_topo, roles_c, params, int(seeds[1].generate_state(1)[0]))
    n_backup = int(round(backup_fraction * cyber_topo.n))
    ranked = sorted(range(cyber_topo.n), key=lambda j: (-int(cyber_topo.degrees[j]), j))
    return CoupledNetwork(
        physical=phys,
        cyber=cyber_topo,
        physical_roles=roles_p,
        cyber_roles=roles_c,
        coupling=coupling,
        params=params,
        capacity_override=tuple(capacity_override) if capacity_override is not None else None,
        backed_up=frozenset(ranked[:n_backup]),
    )
