"""Grey wolf optimization and its cross-adaptive variant (CAGWO).

The optimizer maximizes a fitness over positions in [0, 1]^dim.  Each wolf
draws from its own random stream, so results do not depend on how fitness
evaluations are scheduled.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError
from .network_model import CoupledNetwork, Region
from .regions import enumerate_connected

log = logging.getLogger(__name__)

SHIFT_EPS = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    pack_size: int = 40
    max_iter: int = 1000
    # omega / 4 is the initial control coefficient, eta / 2 its decay exponent;
    # the defaults give the canonical linear decrease from 2 to 0
    omega: float = 8.0
    eta: float = 2.0
    adaptive_position: bool = True
    cross_optimal: bool = True
    stagnation: int = 10
    patience: int = 100
    threads: int = 1
    # encircling moves are computed relative to this point of the box; the
    # canonical update is not translation invariant, so it matters
    center: float = 0.0

    def __post_init__(self):
        if self.pack_size < 4:
            raise ConfigurationError("pack_size must be >= 4")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be >= 1")
        if self.stagnation < 1 or self.patience < 1:
            raise ConfigurationError("stagnation and patience must be >= 1")

    @classmethod
    def gwo(cls, **kw) -> "OptimizerConfig":
        return cls(adaptive_position=False, cross_optimal=False, **kw)

    @classmethod
    def cagwo(cls, **kw) -> "OptimizerConfig":
        return cls(adaptive_position=True, cross_optimal=True, **kw)

    def control(self, t: int) -> float:
        """Control coefficient ``a`` at iteration t."""
        frac = min(1.0, t / self.max_iter)
        return (self.omega / 4.0) * (1.0 - frac ** (self.eta / 2.0))


@dataclass
class Wolf:
    position: np.ndarray
    fitness: float

    @property
    def k(self) -> float:
        return 1.0 / self.fitness if self.fitness > 0 else math.inf


@dataclass
class PackState:
    positions: np.ndarray  # (N, dim)
    fitness: np.ndarray  # (N,)
    leaders: list[tuple[float, np.ndarray]]  # best three ever, best first
    rngs: list[np.random.Generator]
    t: int = 0
    personal_best: np.ndarray | None = None
    stall: np.ndarray | None = None

    @property
    def leader_positions(self) -> list[np.ndarray]:
        return [p for _, p in self.leaders]


@dataclass
class OptimizeResult:
    best: Wolf
    history: list[tuple[int, float, float]]  # iteration, best-ever, pack mean
    iterations: int
    reinitialized: int = 0

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "best_fitness", "mean_fitness"])
        for it, b, m in self.history:
            w.writerow([it, f"{b:.5e}", f"{m:.5e}"])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# update rules

def select_leaders(positions: np.ndarray, fitness: np.ndarray,
                   previous: Sequence[tuple[float, np.ndarray]] = ()) -> list[tuple[float, np.ndarray]]:
    """Three best distinct candidates among the pack and previous leaders.

    Ties go to earlier leaders, then to lower pack index.
    """
    cands = [(f, p, -1, k) for k, (f, p) in enumerate(previous)]
    cands += [(float(f), positions[i], i, 0) for i, f in enumerate(fitness) if math.isfinite(f)]
    cands.sort(key=lambda c: (-c[0], c[2], c[3]))
    out: list[tuple[float, np.ndarray]] = []
    for f, p, _, _ in cands:
        if any(np.array_equal(p, q) for _, q in out):
            continue
        out.append((f, p.copy()))
        if len(out) == 3:
            break
    while out and len(out) < 3:
        out.append(out[-1])
    return out


def guided_positions(wolf: np.ndarray, leaders: Sequence[np.ndarray], a: float,
                     rng: np.random.Generator, center: float = 0.0) -> list[np.ndarray]:
    """Canonical encircling moves X_k = W_k - A |C W_k - W| for the three leaders.

    The move is not translation invariant (its step scales with |W_k|), so
    coordinates are taken relative to ``center``.
    """
    dim = wolf.shape[0]
    r = rng.random((len(leaders), 2, dim))
    w = wolf - center
    out = []
    for k, lead in enumerate(leaders):
        A = 2.0 * a * r[k, 0] - a
        C = 2.0 * r[k, 1]
        lc = lead - center
        out.append(lc - A * np.abs(C * lc - w) + center)
    return out


def classic_gwo_step(pack: PackState, cfg: OptimizerConfig) -> np.ndarray:
    """New positions from the canonical update (mean of the three guided moves)."""
    a = cfg.control(pack.t)
    leaders = pack.leader_positions
    new = np.empty_like(pack.positions)
    for i, w in enumerate(pack.positions):
        g = guided_positions(w, leaders, a, pack.rngs[i], cfg.center)
        new[i] = (g[0] + g[1] + g[2]) / 3.0
    return np.clip(new, 0.0, 1.0)


def adaptive_position_update(wolf: np.ndarray, leaders: Sequence[np.ndarray], k_i: float, k_j: float,
                             k_z: float, k_n: float, k_avg: float) -> np.ndarray:
    """Fitness-weighted leader combination for above-average wolves, centroid otherwise."""
    w1, w2, w3 = (np.asarray(v, dtype=float) for v in leaders)
    s = k_i + k_j + k_z
    if k_n >= k_avg and s != 0 and math.isfinite(s):
        return (k_i * w1 + k_j * w2 + k_z * w3) / s
    return (w1 + w2 + w3) / 3.0


def cross_optimal_update(wolf: np.ndarray, best: np.ndarray, rng: np.random.Generator | None = None,
                         gamma: float | None = None, beta: float | None = None) -> np.ndarray:
    """W' = W_mu + |gamma W_mu - W| beta, clamped to [0, 1]."""
    if gamma is None or beta is None:
        if rng is None:
            raise ValueError("need an rng or explicit gamma and beta")
        g, b = rng.random(2)
        gamma = 1.0 + g if gamma is None else gamma
        beta = b if beta is None else beta
    best = np.asarray(best, dtype=float)
    return np.clip(best + np.abs(gamma * best - np.asarray(wolf, dtype=float)) * beta, 0.0, 1.0)


def reciprocal_weights(fitness: np.ndarray) -> tuple[np.ndarray, float]:
    """Reciprocal costs for the adaptive update, and the reciprocal of the mean cost.

    Cost is the negated fitness.  When any cost is <= 0 the costs are shifted
    by ``-min + 1e-12`` first.
    """
    cost = -np.asarray(fitness, dtype=float)
    if cost.min() <= 0:
        cost = cost - cost.min() + SHIFT_EPS
    return 1.0 / cost, 1.0 / cost.mean()


def cagwo_step(pack: PackState, cfg: OptimizerConfig) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Adaptive moves for every wolf plus cross-optimal candidates for stagnant ones.

    The caller keeps a candidate only when it scores better than the move.
    """
    a = cfg.control(pack.t)
    leaders = pack.leader_positions
    finite = np.where(np.isfinite(pack.fitness), pack.fitness, np.nanmin(pack.fitness[np.isfinite(pack.fitness)]))
    lead_fit = np.array([f for f, _ in pack.leaders])
    k_all, k_avg = reciprocal_weights(np.concatenate([finite, lead_fit]))
    k_pack, k_lead = k_all[: len(finite)], k_all[len(finite):]
    new = np.empty_like(pack.positions)
    for i, w in enumerate(pack.positions):
        g = guided_positions(w, leaders, a, pack.rngs[i], cfg.center)
        if cfg.adaptive_position:
            new[i] = adaptive_position_update(w, g, k_lead[0], k_lead[1], k_lead[2], k_pack[i], k_avg)
        else:
            new[i] = (g[0] + g[1] + g[2]) / 3.0
    new = np.clip(new, 0.0, 1.0)
    crossed: dict[int, np.ndarray] = {}
    if cfg.cross_optimal and pack.stall is not None:
        best = leaders[0]
        for i in np.flatnonzero(pack.stall >= cfg.stagnation):
            crossed[int(i)] = cross_optimal_update(pack.positions[i], best, pack.rngs[i])
            pack.stall[i] = 0
    return new, crossed


# ---------------------------------------------------------------------------

def _evaluate(fitness: Callable, positions: np.ndarray, vectorized: bool, threads: int) -> np.ndarray:
    if vectorized:
        return np.asarray(fitness(positions), dtype=float)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return np.array(list(ex.map(fitness, positions)), dtype=float)
    return np.array([fitness(p) for p in positions], dtype=float)


def optimize(fitness: Callable[[np.ndarray], float], dim: int, config: OptimizerConfig | None = None,
             rng_seed: int = 0, vectorized: bool = False,
             init: Callable[[np.random.Generator, int], np.ndarray] | None = None) -> OptimizeResult:
    """Run the pack for up to ``max_iter`` iterations and return the best-ever wolf.

    Iteration 0 is the initial pack.  The run stops early when the best
    fitness has not changed for ``patience`` iterations.  A wolf with a
    non-finite fitness is re-drawn once, and scored ``-inf`` if still bad.
    """
    cfg = config or OptimizerConfig()
    ss = np.random.SeedSequence(rng_seed)
    rngs = [np.random.default_rng(s) for s in ss.spawn(cfg.pack_size)]
    draw = init or (lambda rng, d: rng.random(d))
    pos = np.array([draw(r, dim) for r in rngs], dtype=float)
    fit = _evaluate(fitness, pos, vectorized, cfg.threads)
    reinit = 0

    def repair(pos: np.ndarray, fit: np.ndarray) -> int:
        bad = np.flatnonzero(~np.isfinite(fit))
        for i in bad:
            log.warning("non-finite fitness for wolf %d, re-initializing", i)
            pos[i] = draw(rngs[i], dim)
            f = float(fitness(pos[i:i + 1])[0]) if vectorized else float(fitness(pos[i]))
            fit[i] = f if math.isfinite(f) else -math.inf
        return len(bad)

    reinit += repair(pos, fit)
    pack = PackState(pos, fit, select_leaders(pos, fit), rngs, 0, fit.copy(), np.zeros(cfg.pack_size, dtype=int))
    history = [(0, pack.leaders[0][0], float(np.mean(fit[np.isfinite(fit)])) if np.isfinite(fit).any() else -math.inf)]
    unchanged = 0
    t = 0
    for t in range(1, cfg.max_iter):
        pack.t = t
        crossed: dict[int, np.ndarray] = {}
        if cfg.adaptive_position or cfg.cross_optimal:
            new, crossed = cagwo_step(pack, cfg)
        else:
            new = classic_gwo_step(pack, cfg)
        fit = _evaluate(fitness, new, vectorized, cfg.threads)
        reinit += repair(new, fit)
        if crossed:
            idx = sorted(crossed)
            alt = np.array([crossed[i] for i in idx])
            alt_fit = _evaluate(fitness, alt, vectorized, cfg.threads)
            for k, i in enumerate(idx):
                if math.isfinite(alt_fit[k]) and alt_fit[k] > fit[i]:
                    new[i], fit[i] = alt[k], alt_fit[k]
        improved = fit > pack.personal_best
        pack.personal_best = np.where(improved, fit, pack.personal_best)
        pack.stall = np.where(improved, 0, pack.stall + 1)
        pack.positions, pack.fitness = new, fit
        prev_best = pack.leaders[0][0]
        pack.leaders = select_leaders(new, fit, pack.leaders)
        best = pack.leaders[0][0]
        history.append((t, best, float(np.mean(fit[np.isfinite(fit)])) if np.isfinite(fit).any() else -math.inf))
        unchanged = unchanged + 1 if best == prev_best else 0
        if unchanged >= cfg.patience:
            break
    f0, p0 = pack.leaders[0]
    return OptimizeResult(Wolf(p0.copy(), f0), history, t + 1, reinit)


# ---------------------------------------------------------------------------
# benchmarks (positions in [0, 1] mapped to [-5.12, 5.12]); their native
# domain is symmetric about 0, so runs use BENCHMARK_CENTER as the frame origin

BENCHMARK_CENTER = 0.5


def _scale(x: np.ndarray) -> np.ndarray:
    return (np.asarray(x, dtype=float) - 0.5) * 10.24


def sphere(x: np.ndarray) -> np.ndarray:
    z = _scale(x)
    return np.sum(z * z, axis=-1)


def rastrigin(x: np.ndarray) -> np.ndarray:
    z = _scale(x)
    return 10.0 * z.shape[-1] + np.sum(z * z - 10.0 * np.cos(2 * np.pi * z), axis=-1)


# ---------------------------------------------------------------------------
# region encoding

def node_order(net: CoupledNetwork) -> list:
    """Coordinate order: cyber nodes, then physical nodes."""
    return [net.node_at(k) for k in range(net.n_total)]


def encode_region(region: Region, net: CoupledNetwork) -> np.ndarray:
    v = np.zeros(net.n_total)
    for node in region.nodes():
        v[net.flat(node)] = 1.0
    return v


def decode_region(position: np.ndarray, net: CoupledNetwork) -> Region:
    """Nodes whose coordinate is strictly above 0.5."""
    position = np.asarray(position)
    if position.shape != (net.n_total,):
        raise ValueError(f"position must have length {net.n_total}")
    return Region.of(net.node_at(int(k)) for k in np.flatnonzero(position > 0.5))


def decode_connected(position: np.ndarray, net: CoupledNetwork, max_size: int,
                     exact_size: bool = False) -> Region:
    """Grow a connected region from the highest coordinate.

    Each round adds the frontier node with the largest coordinate.  Without
    ``exact_size`` only coordinates above 0.5 are taken, so the result may be
    empty; with it the region always has ``max_size`` nodes (when the
    component is large enough).
    """
    position = np.asarray(position)
    seed = int(np.argmax(position))
    if not exact_size and position[seed] <= 0.5:
        return Region.of([])
    adj = net.union_adj
    chosen = [seed]
    members = {seed}
    frontier: set[int] = {net.flat(w) for w in adj[seed]}
    while len(chosen) < max_size and frontier:
        nxt = max(frontier, key=lambda k: (position[k], -k))
        if not exact_size and position[nxt] <= 0.5:
            break
        chosen.append(nxt)
        members.add(nxt)
        frontier.discard(nxt)
        frontier.update(net.flat(w) for w in adj[nxt] if net.flat(w) not in members)
    return Region.of(net.node_at(k) for k in chosen)


@dataclass
class RegionFitness:
    """Probability times impact of the decoded region, cached per region."""

    net: CoupledNetwork
    probability: Callable[[Region], float]
    impact: Callable[[Region], tuple[float, float]]  # (r_max, eta)
    w1: float = 0.5
    w2: float = 0.5
    max_size: int | None = None
    exact_size: bool = False
    cache: dict = field(default_factory=dict)

    def region(self, position: np.ndarray) -> Region:
        if self.max_size is None:
            return decode_region(position, self.net)
        return decode_connected(position, self.net, self.max_size, self.exact_size)

    def score(self, region: Region) -> float:
        if region in self.cache:
            return self.cache[region]
        if region.size == 0:
            val = 0.0
        else:
            p = self.probability(region)
            if p == 0.0:
                val = 0.0
            else:
                r_max, eta = self.impact(region)
                val = p * (self.w1 * (1.0 - r_max) + self.w2 * eta)
        self.cache[region] = val
        return val

    def __call__(self, position: np.ndarray) -> float:
        return self.score(self.region(position))


def best_region_exhaustive(fitness: RegionFitness, max_size: int) -> tuple[Region, float]:
    """Highest-scoring connected region of at most ``max_size`` nodes.

    Ties go to the smaller region, then to the lexicographically first one.
    """
    net = fitness.net
    adj = [[net.flat(w) for w in nbrs] for nbrs in net.union_adj]
    best: tuple[float, int, tuple[int, ...]] | None = None
    for sub in enumerate_connected(adj, max_size):
        region = Region.of(net.node_at(k) for k in sub)
        key = (-fitness.score(region), len(sub), tuple(sorted(sub)))
        if best is None or key < best:
            best = key
    assert best is not None
    return Region.of(net.node_at(k) for k in best[2]), -best[0]
