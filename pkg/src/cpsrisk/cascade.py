"""Risk propagation across the two layers, one synchronous step at a time.

A step resolves every pending event of the current state:

* overloaded nodes trip (always, or with probability ``1 - exp(-load/bound)``
  in probabilistic mode);
* cyber nodes whose power supplier is down fail;
* physical nodes that lost their governing control node trip with
  ``control_trip_prob`` (drawn once per node).

Failed physical load moves to working physical neighbours in proportion to
their initial load; failed cyber load moves to working cyber neighbours in
proportion to ``degree ** theta``.  Afterwards the cyber total is rescaled to
the current monitoring demand of the working physical layer.
Physical failures are applied before cyber failures inside a step.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigurationError
from .network_model import CoupledNetwork, Layer, NodeId, Region, cyber, physical

ABSORPTION = "absorption"
TRANSITION = "transition"


@dataclass(frozen=True)
class CascadeConfig:
    failure_mode: str = "deterministic"
    # 0 = loss of controllability only, 1 = governed node fails outright
    control_trip_prob: float = 0.5
    max_steps: int | None = None

    def __post_init__(self):
        if self.failure_mode not in ("deterministic", "probabilistic"):
            raise ConfigurationError(f"unknown failure_mode {self.failure_mode!r}")
        if not 0.0 <= self.control_trip_prob <= 1.0:
            raise ConfigurationError("control_trip_prob must lie in [0, 1]")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigurationError("max_steps must be >= 1")


@dataclass
class SystemState:
    """Aggregate state (X, I, Y, L, K) plus per-node detail.

    ``L`` is 0 when the last processed failure was physical, 1 when cyber.
    ``K`` is 1 in a transition state and 0 once absorbed; ``I = 1 - K``.
    """

    n: int
    X: int
    Y: int
    L: int
    K: int
    p_alive: list[bool]
    c_alive: list[bool]
    p_load: list[float]
    c_load: list[float]
    p_deg: list[int]
    c_deg: list[int]
    trip_drawn: list[bool]
    cyber_total: float
    fail_step: dict[NodeId, int] = field(default_factory=dict)
    lost: float = 0.0
    released: float = 0.0
    recovered: float = 0.0

    @property
    def I(self) -> int:  # noqa: E743 - state variable name
        return 1 - self.K

    def copy(self) -> "SystemState":
        return replace(
            self,
            p_alive=self.p_alive[:], c_alive=self.c_alive[:], p_load=self.p_load[:], c_load=self.c_load[:],
            p_deg=self.p_deg[:], c_deg=self.c_deg[:], trip_drawn=self.trip_drawn[:], fail_step=dict(self.fail_step),
        )

    def failed(self) -> Region:
        return Region(
            frozenset(i for i, a in enumerate(self.c_alive) if not a),
            frozenset(i for i, a in enumerate(self.p_alive) if not a),
        )

    def alive_load(self) -> float:
        return (sum(l for l, a in zip(self.p_load, self.p_alive) if a)
                + sum(l for l, a in zip(self.c_load, self.c_alive) if a))

    def alive_physical_load(self) -> float:
        return sum(l for l, a in zip(self.p_load, self.p_alive) if a)

    def key(self) -> tuple[int, int, int, int]:
        return self.X, self.Y, self.L, self.K

    def snapshot(self) -> "Snapshot":
        return Snapshot(self.n, self.X, self.Y, self.I, self.L, self.K, self.failed())


@dataclass(frozen=True)
class Snapshot:
    n: int
    X: int
    Y: int
    I: int  # noqa: E741
    L: int
    K: int
    failed: Region

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n, "X": self.X, "Y": self.Y, "I": self.I, "L": self.L, "K": self.K,
            "failed_node_ids": [str(v) for v in self.failed.nodes()],
        }, separators=(",", ":"))


@dataclass(frozen=True)
class StepEvents:
    """Everything that may happen in the next step of a state.

    ``certain`` fail for sure.  ``overload`` and ``trips`` are independent
    Bernoulli events; when ``conditioned`` is set the overload draws are
    conditioned on at least one failure, because an all-survive outcome would
    leave the state unchanged (idle steps are skipped).
    """

    certain: tuple[NodeId, ...]
    overload: tuple[tuple[NodeId, float], ...]
    trips: tuple[tuple[int, float], ...]
    settle: tuple[int, ...]  # trip draws resolved by a certain failure

    @property
    def empty(self) -> bool:
        return not (self.certain or self.overload or self.trips or self.settle)

    @property
    def conditioned(self) -> bool:
        return bool(self.overload) and not (self.certain or self.trips or self.settle)


@dataclass(frozen=True)
class Outcome:
    failing: frozenset[NodeId]
    drawn: frozenset[int]


@dataclass
class CascadeTrace:
    snapshots: list[Snapshot]
    initial_faults: Region
    terminal: SystemState
    truncated: bool = False

    @property
    def region(self) -> Region:
        return self.terminal.failed()

    @property
    def failure_order(self) -> dict[NodeId, int]:
        return dict(sorted(self.terminal.fail_step.items(), key=lambda kv: (kv[1], kv[0].layer != Layer.CYBER, kv[0].index)))

    def __len__(self) -> int:
        return len(self.snapshots)

    def to_jsonl(self) -> str:
        return "".join(s.to_json() + "\n" for s in self.snapshots)

    @classmethod
    def from_jsonl(cls, text: str) -> list[Snapshot]:
        out = []
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            out.append(Snapshot(d["n"], d["X"], d["Y"], d["I"], d["L"], d["K"],
                                Region.of(NodeId.parse(s) for s in d["failed_node_ids"])))
        return out


class CascadeModel:
    """Dynamics of one coupled network under a fixed configuration."""

    def __init__(self, net: CoupledNetwork, config: CascadeConfig | None = None):
        self.net = net
        self.config = config or CascadeConfig()
        p = net.params
        self.theta = p.theta
        self.alpha = p.alpha
        self.delta = p.delta
        self.p_adj = net.physical.adj
        self.c_adj = net.cyber.adj
        self.p_load0 = [float(v) for v in net.physical_load0]
        self.p_bound = [float(v) for v in net.physical_bounds]
        self.c_bound = [float(v) for v in net.cyber_bounds]
        self.supplier = net.coupling.supplier
        self.governor = net.coupling.governor
        self.backed_up = net.backed_up
        self.max_steps = self.config.max_steps or 10 * net.n_total

    # -- states ------------------------------------------------------------
    def intact_state(self) -> SystemState:
        net = self.net
        return SystemState(
            n=0, X=0, Y=0, L=1, K=0,
            p_alive=[True] * net.n_physical, c_alive=[True] * net.n_cyber,
            p_load=self.p_load0[:], c_load=[float(v) for v in net.cyber_load0],
            p_deg=[int(d) for d in net.physical.degrees], c_deg=[int(d) for d in net.cyber.degrees],
            trip_drawn=[False] * net.n_physical,
            cyber_total=float(net.total_cyber_load0),
        )

    def initial_state(self, initial_faults: Iterable[NodeId]) -> SystemState:
        faults = frozenset(initial_faults)
        if not faults:
            raise ValueError("initial fault set must be non-empty")
        for v in faults:
            size = self.net.n_cyber if v.layer is Layer.CYBER else self.net.n_physical
            if not 0 <= v.index < size:
                raise ValueError(f"initial fault {v} does not exist")
        state = self._apply(self.intact_state(), faults, frozenset(), step_index=0)
        state.K = 0 if self.events(state).empty else 1
        return state

    # -- classification ----------------------------------------------------
    def violations(self, state: SystemState) -> list[tuple[NodeId, float]]:
        """Alive nodes over their constraint, with load/bound ratio."""
        out = []
        for i, (a, l) in enumerate(zip(state.p_alive, state.p_load)):
            if a and l > self.p_bound[i]:
                out.append((physical(i), l / self.p_bound[i] if self.p_bound[i] > 0 else math.inf))
        for j, (a, l) in enumerate(zip(state.c_alive, state.c_load)):
            if a and j not in self.backed_up and l > self.c_bound[j]:
                out.append((cyber(j), l / self.c_bound[j] if self.c_bound[j] > 0 else math.inf))
        return out

    def events(self, state: SystemState) -> StepEvents:
        certain: list[NodeId] = []
        overload: list[tuple[NodeId, float]] = []
        probabilistic = self.config.failure_mode == "probabilistic"
        for node, ratio in self.violations(state):
            if probabilistic and math.isfinite(ratio):
                overload.append((node, 1.0 - math.exp(-ratio)))
            else:
                certain.append(node)
        for j, a in enumerate(state.c_alive):
            if a and not state.p_alive[self.supplier[j]] and cyber(j) not in certain:
                certain.append(cyber(j))
        trips: list[tuple[int, float]] = []
        settle: list[int] = []
        t = self.config.control_trip_prob
        if t <= 0.0:
            return StepEvents(tuple(certain), tuple(overload), (), ())
        for i, a in enumerate(state.p_alive):
            g = self.governor[i]
            if a and g >= 0 and not state.c_alive[g] and not state.trip_drawn[i]:
                if physical(i) in certain:
                    settle.append(i)
                elif t >= 1.0:
                    certain.append(physical(i))
                    settle.append(i)
                else:
                    trips.append((i, t))
        return StepEvents(tuple(certain), tuple(overload), tuple(trips), tuple(settle))

    def classify_state(self, state: SystemState) -> str:
        return ABSORPTION if self.events(state).empty else TRANSITION

    # -- outcomes ----------------------------------------------------------
    def outcomes(self, events: StepEvents) -> Iterator[tuple[Outcome, float]]:
        """Every possible outcome of a step with its exact probability."""
        base_fail = frozenset(events.certain)
        drawn = frozenset(events.settle) | frozenset(i for i, _ in events.trips)
        ov = events.overload
        stay = math.prod(1.0 - p for _, p in ov)
        norm = 1.0 - stay if events.conditioned else 1.0
        trip_opts = [((True, p), (False, 1.0 - p)) for _, p in events.trips]
        ov_opts = [((True, p), (False, 1.0 - p)) for _, p in ov]
        for ov_pick in product(*ov_opts):
            if events.conditioned and not any(f for f, _ in ov_pick):
                continue
            p_ov = math.prod(p for _, p in ov_pick) / norm
            if p_ov == 0.0:
                continue
            ov_fail = {n for (n, _), (f, _) in zip(ov, ov_pick) if f}
            for trip_pick in product(*trip_opts):
                p_tr = math.prod(p for _, p in trip_pick)
                if p_tr == 0.0:
                    continue
                tr_fail = {physical(i) for (i, _), (f, _) in zip(events.trips, trip_pick) if f}
                yield Outcome(base_fail | ov_fail | tr_fail, drawn), p_ov * p_tr

    def sample(self, events: StepEvents, rng: np.random.Generator) -> Outcome:
        failing = set(events.certain)
        ov = events.overload
        if ov:
            probs = [p for _, p in ov]
            u = rng.random(len(ov))
            if events.conditioned:
                # first failing index drawn exactly, then the rest independently
                stay = [1.0 - p for p in probs]
                total = 1.0 - math.prod(stay)
                r = u[0] * total
                prefix = 1.0
                first = len(ov) - 1
                for k, p in enumerate(probs):
                    mass = prefix * p
                    if r < mass:
                        first = k
                        break
                    r -= mass
                    prefix *= stay[k]
                failing.add(ov[first][0])
                for k in range(first + 1, len(ov)):
                    if u[k] < probs[k]:
                        failing.add(ov[k][0])
            else:
                for k, (node, p) in enumerate(ov):
                    if u[k] < p:
                        failing.add(node)
        drawn = set(events.settle)
        if events.trips:
            u = rng.random(len(events.trips))
            for k, (i, p) in enumerate(events.trips):
                drawn.add(i)
                if u[k] < p:
                    failing.add(physical(i))
        return Outcome(frozenset(failing), frozenset(drawn))

    # -- transitions -------------------------------------------------------
    def _apply(self, state: SystemState, failing: frozenset[NodeId], drawn: frozenset[int],
               step_index: int) -> SystemState:
        s = state.copy()
        s.n = step_index
        for i in drawn:
            s.trip_drawn[i] = True
        phys_fail = sorted(v.index for v in failing if v.layer is Layer.PHYSICAL and s.p_alive[v.index])
        cyb_fail = sorted(v.index for v in failing if v.layer is Layer.CYBER and s.c_alive[v.index])

        for i in phys_fail:
            s.p_alive[i] = False
            s.fail_step[physical(i)] = step_index
        for i in phys_fail:
            for w in self.p_adj[i]:
                s.p_deg[w] -= 1
        for i in phys_fail:
            amount = s.p_load[i]
            s.p_load[i] = 0.0
            nb = [w for w in self.p_adj[i] if s.p_alive[w]]
            weight = sum(self.p_load0[w] for w in nb)
            if weight > 0:
                for w in nb:
                    s.p_load[w] += amount * self.p_load0[w] / weight
            else:
                s.lost += amount

        for j in cyb_fail:
            s.c_alive[j] = False
            s.fail_step[cyber(j)] = step_index
        for j in cyb_fail:
            for w in self.c_adj[j]:
                s.c_deg[w] -= 1
        theta = self.theta
        for j in cyb_fail:
            amount = s.c_load[j]
            s.c_load[j] = 0.0
            if j in self.backed_up:
                s.recovered += amount
                continue
            nb = [w for w in self.c_adj[j] if s.c_alive[w]]
            ws = [s.c_deg[w] ** theta if s.c_deg[w] > 0 or theta == 0 else 0.0 for w in nb]
            weight = sum(ws)
            if weight > 0:
                for w, x in zip(nb, ws):
                    s.c_load[w] += amount * x / weight
            else:
                s.lost += amount

        if phys_fail:
            total = self.alpha * sum(d ** self.delta for d, a in zip(s.p_deg, s.p_alive) if a)
            if s.cyber_total > 0:
                scale = total / s.cyber_total
                before = 0.0
                for j, a in enumerate(s.c_alive):
                    if a:
                        before += s.c_load[j]
                        s.c_load[j] *= scale
                s.released += before * (1.0 - scale)
            s.cyber_total = total

        s.X += len(phys_fail)
        s.Y += len(cyb_fail)
        if cyb_fail:
            s.L = 1
        elif phys_fail:
            s.L = 0
        return s

    def step(self, state: SystemState, rng: np.random.Generator | None = None,
             outcome: Outcome | None = None) -> SystemState:
        """Advance one step.  With no pending events the state only absorbs."""
        if state.K == 0:
            return state.copy()
        ev = self.events(state)
        if ev.empty:
            s = state.copy()
            s.K = 0
            return s
        if outcome is None:
            outcome = self.sample(ev, rng if rng is not None else np.random.default_rng())
        s = self._apply(state, outcome.failing, outcome.drawn, state.n + 1)
        s.K = 0 if self.events(s).empty else 1
        return s

    def simulate(self, initial_faults: Iterable[NodeId], rng_seed: int | np.random.Generator | None = 0,
                 max_steps: int | None = None) -> CascadeTrace:
        rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
        limit = max_steps or self.max_steps
        state = self.initial_state(initial_faults)
        init = state.failed()
        snaps = [state.snapshot()]
        truncated = False
        while state.K == 1:
            if state.n >= limit:
                truncated = True
                break
            state = self.step(state, rng)
            snaps.append(state.snapshot())
        return CascadeTrace(snaps, init, state, truncated)


def simulate(net: CoupledNetwork, initial_faults: Iterable[NodeId], rng_seed: int = 0,
             max_steps: int | None = None, config: CascadeConfig | None = None) -> CascadeTrace:
    return CascadeModel(net, config).simulate(initial_faults, rng_seed, max_steps)


def classify_state(net: CoupledNetwork, state: SystemState, config: CascadeConfig | None = None) -> str:
    return CascadeModel(net, config).classify_state(state)


def empirical_transition_probability(state: SystemState, successors: Sequence[SystemState]) -> dict:
    """Frequencies of the aggregate successor states of ``state``.

    Besides the joint table, the successor distribution is factored into the
    cyber part (Y, K given the cyber layer) and the physical part (X, K),
    keyed by the layer of the successor's last failure.
    """
    if not successors:
        raise ValueError("need at least one successor state")
    total = len(successors)
    joint: dict[tuple[int, int, int, int], float] = {}
    cyber_part: dict[tuple[int, int], float] = {}
    phys_part: dict[tuple[int, int], float] = {}
    for s in successors:
        joint[s.key()] = joint.get(s.key(), 0.0) + 1.0
        if s.L == 1:
            cyber_part[(s.Y, s.K)] = cyber_part.get((s.Y, s.K), 0.0) + 1.0
        else:
            phys_part[(s.X, s.K)] = phys_part.get((s.X, s.K), 0.0) + 1.0
    nc = sum(cyber_part.values())
    npy = sum(phys_part.values())
    return {
        "from": state.key(),
        "joint": {k: v / total for k, v in sorted(joint.items())},
        "cyber": {k: v / nc for k, v in sorted(cyber_part.items())} if nc else {},
        "physical": {k: v / npy for k, v in sorted(phys_part.items())} if npy else {},
    }
