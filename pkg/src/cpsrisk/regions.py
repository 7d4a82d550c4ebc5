"""Structural admissibility of risk regions and counts of admissible regions.

A region is admissible when it is non-empty, connected in the combined graph
(cyber edges, physical edges and coupling branches) and contains at least one
node that can start a cascade.  Counts per (physical, cyber) split are exact
on small networks (ESU enumeration of connected node sets) and estimated with
Knuth's random-descent estimator on the same search tree otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .network_model import CoupledNetwork, Layer, NodeId, Region


def _flat_adj(net: CoupledNetwork) -> list[list[int]]:
    return [[net.flat(v) for v in nbrs] for nbrs in net.union_adj]


def default_sources(net: CoupledNetwork) -> frozenset[int]:
    """Flat indices of nodes that may carry the initial fault (cyber nodes)."""
    return frozenset(range(net.n_cyber))


def is_connected_region(region: Region, net: CoupledNetwork) -> bool:
    nodes = {net.flat(v) for v in region.nodes()}
    if not nodes:
        return False
    adj = net.union_adj
    start = next(iter(nodes))
    seen = {start}
    stack = [start]
    while stack:
        for w in adj[stack.pop()]:
            k = net.flat(w)
            if k in nodes and k not in seen:
                seen.add(k)
                stack.append(k)
    return len(seen) == len(nodes)


def is_admissible(region: Region, net: CoupledNetwork, sources: Iterable[NodeId] | None = None) -> bool:
    if region.size == 0:
        return False
    for v in region.nodes():
        size = net.n_cyber if v.layer is Layer.CYBER else net.n_physical
        if not 0 <= v.index < size:
            return False
    src = default_sources(net) if sources is None else frozenset(net.flat(v) for v in sources)
    if not any(net.flat(v) in src for v in region.nodes()):
        return False
    return is_connected_region(region, net)


def _split(nodes: Iterable[int], n_cyber: int) -> tuple[int, int]:
    y = x = 0
    for k in nodes:
        if k < n_cyber:
            y += 1
        else:
            x += 1
    return x, y


def enumerate_connected(adj: list[list[int]], max_size: int) -> Iterable[tuple[int, ...]]:
    """Every connected node set of size <= max_size, each exactly once (ESU)."""
    n = len(adj)
    nbr_sets = [set(a) for a in adj]
    for v in range(n):
        stack = [((v,), tuple(w for w in adj[v] if w > v), frozenset(adj[v]) | {v})]
        while stack:
            sub, ext, closed = stack.pop()
            yield sub
            if len(sub) == max_size:
                continue
            ext_list = list(ext)
            while ext_list:
                w = ext_list.pop()
                new_ext = ext_list + [u for u in adj[w] if u > v and u not in closed]
                stack.append((sub + (w,), tuple(new_ext), closed | nbr_sets[w]))


def count_admissible_exact(net: CoupledNetwork, max_size: int,
                           sources: frozenset[int] | None = None) -> dict[tuple[int, int], float]:
    src = default_sources(net) if sources is None else sources
    adj = _flat_adj(net)
    counts: dict[tuple[int, int], float] = {}
    for sub in enumerate_connected(adj, max_size):
        if any(k in src for k in sub):
            key = _split(sub, net.n_cyber)
            counts[key] = counts.get(key, 0.0) + 1.0
    return counts


def count_admissible_estimate(net: CoupledNetwork, max_size: int, walks: int = 20000, seed: int = 0,
                              sources: frozenset[int] | None = None) -> dict[tuple[int, int], float]:
    """Unbiased estimates of admissible-region counts per (physical, cyber) split."""
    src = default_sources(net) if sources is None else sources
    adj = _flat_adj(net)
    nbr_sets = [set(a) for a in adj]
    n = len(adj)
    rng = np.random.default_rng(seed)
    acc: dict[tuple[int, int], float] = {}
    for _ in range(walks):
        v = int(rng.integers(n))
        weight = float(n)
        sub = [v]
        closed = set(adj[v]) | {v}
        ext = [w for w in adj[v] if w > v]
        while True:
            if any(k in src for k in sub):
                key = _split(sub, net.n_cyber)
                acc[key] = acc.get(key, 0.0) + weight
            if len(sub) == max_size or not ext:
                break
            # child i takes ext[i] and keeps ext[i+1:] as its own extension
            i = int(rng.integers(len(ext)))
            weight *= len(ext)
            w = ext[i]
            rest = ext[i + 1:]
            ext = rest + [u for u in adj[w] if u > v and u not in closed]
            sub.append(w)
            closed |= nbr_sets[w]
    return {k: c / walks for k, c in sorted(acc.items())}


@dataclass
class AdmissibleCounts:
    """Number of admissible regions for each (physical count, cyber count)."""

    counts: dict[tuple[int, int], float]
    max_size: int
    exact: bool

    @classmethod
    def for_network(cls, net: CoupledNetwork, max_size: int, exact_limit: int = 16, walks: int = 20000,
                    seed: int = 0, sources: frozenset[int] | None = None) -> "AdmissibleCounts":
        if net.n_total <= exact_limit:
            return cls(count_admissible_exact(net, max_size, sources), max_size, True)
        return cls(count_admissible_estimate(net, max_size, walks, seed, sources), max_size, False)

    def get(self, x: int, y: int) -> float:
        return self.counts.get((x, y), 0.0)
