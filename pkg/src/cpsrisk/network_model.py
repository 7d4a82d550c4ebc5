"""Two-layer topology plus the load and constraint formulas for each layer.

Cyber loads follow a structural model: the total monitoring load is driven by
the degrees of working physical nodes, and it is split across cyber nodes in
proportion to ``degree ** theta``.  Physical loads are ``beta * degree0 ** mu``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import TYPE_CHECKING, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, EdgeListParseError, TotalCollapseError

if TYPE_CHECKING:
    import networkx as nx

    from .coupling import CouplingMap


class Layer(str, enum.Enum):
    CYBER = "cyber"
    PHYSICAL = "physical"


class PhysicalRole(str, enum.Enum):
    GENERATOR = "generator"
    LOAD = "load"
    SUBSTATION = "substation"


class CyberRole(str, enum.Enum):
    MONITOR = "monitor"
    CONTROL = "control"


class NodeId(NamedTuple):
    layer: Layer
    index: int

    def __str__(self) -> str:
        return f"{'c' if self.layer is Layer.CYBER else 'p'}{self.index}"

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        text = text.strip()
        if len(text) < 2 or text[0] not in "cp" or not text[1:].isdigit():
            raise ValueError(f"bad node id {text!r}; expected c<k> or p<k>")
        layer = Layer.CYBER if text[0] == "c" else Layer.PHYSICAL
        return cls(layer, int(text[1:]))


def cyber(i: int) -> NodeId:
    return NodeId(Layer.CYBER, i)


def physical(i: int) -> NodeId:
    return NodeId(Layer.PHYSICAL, i)


@dataclass(frozen=True)
class Region:
    """A set of nodes across both layers, e.g. a predicted risk area."""

    cyber: frozenset[int] = frozenset()
    physical: frozenset[int] = frozenset()

    @classmethod
    def of(cls, nodes: Iterable[NodeId]) -> "Region":
        c, p = set(), set()
        for node in nodes:
            (c if node.layer is Layer.CYBER else p).add(node.index)
        return cls(frozenset(c), frozenset(p))

    @classmethod
    def parse(cls, text: str) -> "Region":
        parts = [t for t in text.replace(";", ",").split(",") if t.strip()]
        return cls.of(NodeId.parse(t) for t in parts)

    @property
    def size(self) -> int:
        return len(self.cyber) + len(self.physical)

    @property
    def split(self) -> tuple[int, int]:
        """(cyber count, physical count)."""
        return len(self.cyber), len(self.physical)

    def nodes(self) -> list[NodeId]:
        return [cyber(i) for i in sorted(self.cyber)] + [physical(i) for i in sorted(self.physical)]

    def __str__(self) -> str:
        return ",".join(str(n) for n in self.nodes())

    def __or__(self, other: "Region") -> "Region":
        return Region(self.cyber | other.cyber, self.physical | other.physical)


@dataclass(frozen=True)
class Topology:
    """Simple undirected graph on nodes ``0..n-1``."""

    n: int
    edges: tuple[tuple[int, int], ...]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Topology":
        seen = set()
        for a, b in edges:
            if a == b:
                raise ConfigurationError(f"self-loop on node {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise ConfigurationError(f"edge ({a}, {b}) out of range for {n} nodes")
            seen.add((min(a, b), max(a, b)))
        return cls(n, tuple(sorted(seen)))

    @cached_property
    def adj(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in self.edges:
            nbrs[a].append(b)
            nbrs[b].append(a)
        return tuple(tuple(sorted(x)) for x in nbrs)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(x) for x in self.adj], dtype=np.int64)

    @property
    def m(self) -> int:
        return len(self.edges)

    def to_networkx(self) -> "nx.Graph":
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        seen = {0}
        stack = [0]
        while stack:
            for w in self.adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n


@dataclass(frozen=True)
class LayerParams:
    alpha: float = 1.0
    delta: float = 2.0
    theta: float = 2.0
    beta: float = 1.0
    mu: float = 2.0
    rho_c: float = 0.5
    rho_p: float = 0.5

    def __post_init__(self):
        if self.rho_c < 0 or self.rho_p < 0:
            raise ConfigurationError("tolerance coefficients must be non-negative")
        for name in ("alpha", "delta", "theta", "beta", "mu"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite")


@dataclass
class PhysicalNode:
    id: NodeId
    role: PhysicalRole
    initial_degree: int
    initial_load: float
    capacity_param: float
    load: float = 0.0
    alive: bool = True


@dataclass
class CyberNode:
    id: NodeId
    role: CyberRole
    degree: int
    initial_load: float
    load: float = 0.0
    alive: bool = True


# ---------------------------------------------------------------------------
# topology sources

def generate_ba_cyber(n: int, m0: int = 3, m: int = 2, rng_seed: int = 0) -> Topology:
    """Barabasi-Albert growth from a complete seed graph on ``m0`` nodes.

    Every later node attaches ``m`` distinct edges, picking targets with
    probability proportional to current degree.
    """
    if not (n > m0 >= m >= 1):
        raise ConfigurationError(f"BA parameters need n > m0 >= m >= 1, got n={n}, m0={m0}, m={m}")
    rng = np.random.default_rng(rng_seed)
    edges = [(a, b) for a in range(m0) for b in range(a + 1, m0)]
    # one entry per edge endpoint, so uniform draws are degree-proportional
    stubs = [v for e in edges for v in e]
    if not stubs:  # m0 == 1: a single seed node with no edges
        stubs = [0]
    for new in range(m0, n):
        targets: list[int] = []
        while len(targets) < m:
            t = stubs[int(rng.integers(len(stubs)))]
            if t not in targets:
                targets.append(t)
        for t in targets:
            edges.append((t, new))
            stubs.extend((t, new))
    return Topology.from_edges(n, edges)


def parse_edge_list(text: str) -> Topology:
    """Parse ``a b`` lines (zero-based, ``#`` comments) into a simple graph."""
    pairs = []
    top = -1
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise EdgeListParseError(line_no, f"expected two node indices, got {raw.strip()!r}")
        try:
            a, b = int(fields[0]), int(fields[1])
        except ValueError:
            raise EdgeListParseError(line_no, f"non-integer node index in {raw.strip()!r}") from None
        if a < 0 or b < 0:
            raise EdgeListParseError(line_no, "node indices must be non-negative")
        if a == b:
            raise EdgeListParseError(line_no, f"self-loop on node {a}")
        pairs.append((a, b))
        top = max(top, a, b)
    return Topology.from_edges(top + 1, pairs)


# Bus classification of the New England system (zero-based): generator buses
# 30-39 and buses carrying demand in the standard case data.
_IEEE39_GENERATORS = frozenset(range(29, 39))
_IEEE39_LOADS = frozenset(b - 1 for b in (1, 3, 4, 7, 8, 9, 12, 15, 16, 18, 20, 21, 23, 24, 25, 26, 27, 28, 29))


def ieee39_roles() -> tuple[PhysicalRole, ...]:
    roles = []
    for i in range(39):
        if i in _IEEE39_GENERATORS:
            roles.append(PhysicalRole.GENERATOR)
        elif i in _IEEE39_LOADS:
            roles.append(PhysicalRole.LOAD)
        else:
            roles.append(PhysicalRole.SUBSTATION)
    return tuple(roles)


def load_physical_topology(source: str) -> tuple[Topology, tuple[PhysicalRole, ...]]:
    """Return the physical graph and node roles.

    ``source`` is either ``"ieee39"`` or edge-list text.  Custom edge lists
    have no bus classification, so every node is a substation.
    """
    if source.strip().lower() == "ieee39":
        text = resources.files("cpsrisk").joinpath("data", "ieee39.edges").read_text()
        return parse_edge_list(text), ieee39_roles()
    topo = parse_edge_list(source)
    return topo, tuple(PhysicalRole.SUBSTATION for _ in range(topo.n))


# ---------------------------------------------------------------------------
# load formulas

def cyber_total_load(physical_degrees: Sequence[float], alive: Sequence[bool] | None = None,
                     alpha: float = 1.0, delta: float = 2.0) -> float:
    """Total cyber load: ``alpha * sum(l_j ** delta)`` over working physical nodes."""
    deg = np.asarray(physical_degrees, dtype=float)
    if alive is not None:
        deg = deg[np.asarray(alive, dtype=bool)]
    return float(alpha * np.sum(deg ** delta))


def distribute_cyber_load(total: float, degrees: Sequence[float], alive: Sequence[bool] | None = None,
                          theta: float = 2.0) -> np.ndarray:
    """Split ``total`` over alive cyber nodes proportionally to ``degree ** theta``.

    Failed nodes get zero.  When every alive node has zero weight (all
    isolated and ``theta > 0``) nothing can be placed and all loads are zero.
    """
    deg = np.asarray(degrees, dtype=float)
    mask = np.ones(deg.shape, bool) if alive is None else np.asarray(alive, dtype=bool)
    out = np.zeros(deg.shape)
    if not mask.any():
        if total > 0:
            raise TotalCollapseError("cyber load to distribute but no cyber node is alive")
        return out
    w = np.where(mask, deg ** theta, 0.0)
    s = w.sum()
    if s > 0:
        out = total * w / s
    return out


def physical_node_load(degree: float, beta: float = 1.0, mu: float = 2.0) -> float:
    if degree < 0:
        raise ValueError("degree must be non-negative")
    return beta * degree ** mu


def cyber_bound(initial_load: float, rho_c: float) -> float:
    return (1.0 + rho_c) * initial_load


def physical_bound(initial_load: float, capacity_param: float, rho_p: float) -> float:
    return (1.0 + rho_p) * math.sqrt(initial_load * capacity_param)


def check_cyber_constraint(node: CyberNode, rho_c: float) -> bool:
    return node.load <= cyber_bound(node.initial_load, rho_c)


def check_physical_constraint(node: PhysicalNode, rho_p: float) -> bool:
    return node.load <= physical_bound(node.initial_load, node.capacity_param, rho_p)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoupledNetwork:
    """Physical layer, cyber layer and the coupling between them.

    Immutable: the cascade engine keeps alive flags and current loads in its
    own state objects.
    """

    physical: Topology
    cyber: Topology
    physical_roles: tuple[PhysicalRole, ...]
    cyber_roles: tuple[CyberRole, ...]
    coupling: "CouplingMap"
    params: LayerParams = field(default_factory=LayerParams)
    capacity_override: tuple[float, ...] | None = None
    backed_up: frozenset[int] = frozenset()

    def __post_init__(self):
        if len(self.physical_roles) != self.physical.n:
            raise ConfigurationError("one role per physical node required")
        if len(self.cyber_roles) != self.cyber.n:
            raise ConfigurationError("one role per cyber node required")
        if len(self.coupling.supplier) != self.cyber.n:
            raise ConfigurationError("coupling map must assign a supplier to every cyber node")

    @property
    def n_physical(self) -> int:
        return self.physical.n

    @property
    def n_cyber(self) -> int:
        return self.cyber.n

    @property
    def n_total(self) -> int:
        return self.physical.n + self.cyber.n

    @cached_property
    def physical_load0(self) -> np.ndarray:
        p = self.params
        return p.beta * self.physical.degrees.astype(float) ** p.mu

    @cached_property
    def capacity(self) -> np.ndarray:
        """Per-node capacity parameter P; defaults to the initial load."""
        if self.capacity_override is not None:
            cap = np.asarray(self.capacity_override, dtype=float)
            if cap.shape != (self.physical.n,) or np.any(cap <= 0):
                raise ConfigurationError("capacity override must be positive, one per physical node")
            return cap
        return self.physical_load0.copy()

    @cached_property
    def physical_bounds(self) -> np.ndarray:
        return (1.0 + self.params.rho_p) * np.sqrt(self.physical_load0 * self.capacity)

    @cached_property
    def total_cyber_load0(self) -> float:
        return cyber_total_load(self.physical.degrees, None, self.params.alpha, self.params.delta)

    @cached_property
    def cyber_load0(self) -> np.ndarray:
        return distribute_cyber_load(self.total_cyber_load0, self.cyber.degrees, None, self.params.theta)

    @cached_property
    def cyber_bounds(self) -> np.ndarray:
        return (1.0 + self.params.rho_c) * self.cyber_load0

    def physical_nodes(self) -> list[PhysicalNode]:
        return [
            PhysicalNode(physical(i), self.physical_roles[i], int(self.physical.degrees[i]),
                         float(self.physical_load0[i]), float(self.capacity[i]), float(self.physical_load0[i]))
            for i in range(self.physical.n)
        ]

    def cyber_nodes(self) -> list[CyberNode]:
        return [
            CyberNode(cyber(j), self.cyber_roles[j], int(self.cyber.degrees[j]),
                      float(self.cyber_load0[j]), float(self.cyber_load0[j]))
            for j in range(self.cyber.n)
        ]

    def with_params(self, **changes) -> "CoupledNetwork":
        """Same topology and coupling with some layer parameters replaced."""
        from dataclasses import replace

        return replace(self, params=replace(self.params, **changes))

    @cached_property
    def union_adj(self) -> tuple[tuple[NodeId, ...], ...]:
        """Neighbours in the combined graph (both layers plus coupling links).

        Indexed by flat position: cyber nodes first, then physical nodes.
        """
        nc = self.cyber.n
        nbrs: list[set[int]] = [set() for _ in range(self.n_total)]
        for a, b in self.cyber.edges:
            nbrs[a].add(b)
            nbrs[b].add(a)
        for a, b in self.physical.edges:
            nbrs[nc + a].add(nc + b)
            nbrs[nc + b].add(nc + a)
        for c, p in self.coupling.links():
            nbrs[c].add(nc + p)
            nbrs[nc + p].add(c)
        return tuple(tuple(self.node_at(k) for k in sorted(s)) for s in nbrs)

    def flat(self, node: NodeId) -> int:
        return node.index if node.layer is Layer.CYBER else self.cyber.n + node.index

    def node_at(self, k: int) -> NodeId:
        return cyber(k) if k < self.cyber.n else physical(k - self.cyber.n)

    def summary(self) -> dict:
        return {
            "physical_nodes": self.physical.n,
            "physical_edges": self.physical.m,
            "cyber_nodes": self.cyber.n,
            "cyber_edges": self.cyber.m,
            "coupling_branches": self.coupling.branch_count(),
            "control_nodes": sum(r is CyberRole.CONTROL for r in self.cyber_roles),
            "backed_up": len(self.backed_up),
            "mean_cyber_degree": float(self.cyber.degrees.mean()) if self.cyber.n else 0.0,
        }
