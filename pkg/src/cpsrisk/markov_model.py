"""Dependent-Markov risk model: transition laws, the fault-count recursion,
recovery-profile estimation and the fixed-rate baseline.

Fault counts: ``x`` physical, ``y`` cyber.  ``X(x, y)`` is the probability
that the cascade settles with those counts, ``Y(x, y)`` the probability that
it is still propagating there.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .cascade import CascadeTrace, Snapshot
from .errors import DegenerateStateError, SingularProfileError, ValidationError
from .network_model import CoupledNetwork, NodeId, Region
from .regions import AdmissibleCounts, is_admissible

log = logging.getLogger(__name__)

READINGS = ("verbatim", "corrected")


@dataclass(frozen=True)
class RecoveryProfile:
    """Tabulated p(x), q(y), d(y) on domains starting at 0.

    Lookups past the end of a table return its last entry.
    """

    p: tuple[float, ...]
    q: tuple[float, ...]
    d: tuple[float, ...]

    def __post_init__(self):
        for name in ("p", "q", "d"):
            vals = getattr(self, name)
            if not vals:
                raise ValidationError(f"{name} needs at least one value")
            if any(not (0.0 <= v <= 1.0) for v in vals):
                raise ValidationError(f"{name} values must lie in [0, 1]")

    @property
    def m_c(self) -> int:
        return len(self.d) - 1

    @staticmethod
    def _at(vals: tuple[float, ...], k: int, name: str) -> float:
        if k < 0:
            raise IndexError(f"{name} is undefined at {k}")
        return vals[min(k, len(vals) - 1)]

    def p_at(self, x: int) -> float:
        return self._at(self.p, x, "p")

    def q_at(self, y: int) -> float:
        return self._at(self.q, y, "q")

    def d_at(self, y: int) -> float:
        return self._at(self.d, y, "d")

    @classmethod
    def constant(cls, p: float, q: float, d: float, size: int = 1) -> "RecoveryProfile":
        return cls((p,) * size, (q,) * size, (d,) * size)

    @classmethod
    def parametric(cls, p0: float, lam_p: float, q0: float, lam_q: float, d0: float, lam_d: float,
                   x_max: int, y_max: int) -> "RecoveryProfile":
        """``f(k) = f0 * exp(-lam * k)`` for each of p, q, d."""
        return cls(
            tuple(p0 * math.exp(-lam_p * k) for k in range(x_max + 1)),
            tuple(q0 * math.exp(-lam_q * k) for k in range(y_max + 1)),
            tuple(d0 * math.exp(-lam_d * k) for k in range(y_max + 1)),
        )

    def to_json(self) -> str:
        doc = {
            name: {"domain": [0, len(vals) - 1], "values": list(vals)}
            for name, vals in (("p", self.p), ("q", self.q), ("d", self.d))
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RecoveryProfile":
        doc = json.loads(text)
        vals = {}
        for name in ("p", "q", "d"):
            entry = doc[name]
            lo, hi = entry["domain"]
            if lo != 0 or hi != len(entry["values"]) - 1:
                raise ValidationError(f"{name}: domain {entry['domain']} does not match its values")
            vals[name] = tuple(float(v) for v in entry["values"])
        return cls(**vals)


# ---------------------------------------------------------------------------
# one-step transition laws

def cyber_transition(q_y: float) -> dict[int, float]:
    """Distribution of K after a new cyber failure: absorb with q(y)."""
    if not 0.0 <= q_y <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    return {0: q_y, 1: 1.0 - q_y}


def physical_transition(p_x: float, d_y: float, k_n: float) -> dict[int, float]:
    """Distribution of K after a new physical failure induced via coupling."""
    for v in (p_x, d_y, k_n):
        if not 0.0 <= v <= 1.0:
            raise ValueError("inputs must lie in [0, 1]")
    den = k_n + d_y * (1.0 - k_n)
    if den == 0.0:
        raise DegenerateStateError("k_n + d(y)(1 - k_n) is zero")
    go = p_x * d_y / den
    return {0: 1.0 - go, 1: go}


# ---------------------------------------------------------------------------
# recursion coefficients

def _div(num: float, den: float, term: str, where: tuple[int, int]) -> float:
    if den == 0.0:
        raise SingularProfileError(term, f"at x_prev={where[0]}, y_prev={where[1]}")
    return num / den


def alpha1(x: int, y: int, pr: RecoveryProfile, x_prev: int, y_prev: int) -> float:
    pp = pr.p_at(x_prev)
    return _div(pr.p_at(x) * (1 - pr.q_at(y)) * (1 - pp), pp, "p(x_{i-1})", (x_prev, y_prev))


def alpha2(x: int, y: int, pr: RecoveryProfile, x_prev: int, y_prev: int) -> float:
    pp, dp = pr.p_at(x_prev), pr.d_at(y_prev)
    num = pr.p_at(x) * pr.d_at(y) * pr.q_at(y_prev) * (1 - pp * dp)
    if pp == 0.0:
        raise SingularProfileError("p(x_{i-1})", f"at x_prev={x_prev}")
    return _div(num, pp * dp, "d(y_{i-1})", (x_prev, y_prev))


def alpha3(x: int, y: int, pr: RecoveryProfile, x_prev: int, y_prev: int) -> float:
    pp, dp, qp = pr.p_at(x_prev), pr.d_at(y_prev), pr.q_at(y_prev)
    px, dy, qy = pr.p_at(x), pr.d_at(y), pr.q_at(y)
    first = (1 - qp) * px * dy * (pp - _div(1 - pp, dp, "d(y_{i-1})", (x_prev, y_prev)))
    return first + qp * px * (1 - qy) * (1 - dy)


def alpha4(x: int, y: int, pr: RecoveryProfile, x_prev: int, y_prev: int) -> float:
    pp = pr.p_at(x_prev)
    return _div(1 - pp, pp, "p(x_{i-1})", (x_prev, y_prev))


def alpha5(x: int, y: int, pr: RecoveryProfile, x_prev: int, y_prev: int) -> float:
    pp = pr.p_at(x_prev)
    return pr.q_at(y_prev) * (1 - pp * pr.d_at(y)) - pr.d_at(y) * (1 - pp)


_ALPHAS = (alpha1, alpha2, alpha3, alpha4, alpha5)


def alpha_coefficients(x: int, y: int, profile: RecoveryProfile, x_prev: int | None = None,
                       y_prev: int | None = None) -> tuple[float, float, float, float, float]:
    """The five recursion coefficients at cell (x, y).

    The "previous" arguments default to the grid predecessor (x-1, y-1).
    """
    xp = x - 1 if x_prev is None else x_prev
    yp = y - 1 if y_prev is None else y_prev
    return tuple(f(x, y, profile, xp, yp) for f in _ALPHAS)  # type: ignore[return-value]


# ---------------------------------------------------------------------------

@dataclass
class AsymptoticTable:
    X: np.ndarray  # indexed [x, y]
    Y: np.ndarray
    reading: str
    origin: tuple[int, int]
    clamp_events: list[tuple[str, int, int, float]] = field(default_factory=list)

    @property
    def x_max(self) -> int:
        return self.X.shape[0] - 1

    @property
    def y_max(self) -> int:
        return self.X.shape[1] - 1

    def absorb(self, x: int, y: int) -> float:
        if 0 <= x <= self.x_max and 0 <= y <= self.y_max:
            return float(self.X[x, y])
        return 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "X", "Y"])
        for x in range(self.x_max + 1):
            for y in range(self.y_max + 1):
                w.writerow([x, y, fmt(self.X[x, y]), fmt(self.Y[x, y])])
        return buf.getvalue()


def fmt(v: float) -> str:
    """Canonical float text: 6 significant digits, scientific notation."""
    return f"{float(v):.5e}"


def _clamp(v: float, name: str, x: int, y: int, events: list) -> float:
    if v < 0.0 or v > 1.0 or math.isnan(v):
        c = 0.0 if (math.isnan(v) or v < 0.0) else 1.0
        events.append((name, x, y, v))
        log.debug("clamped %s(%d, %d) = %r to %r", name, x, y, v, c)
        return c
    return v


def asymptotic_probabilities(profile: RecoveryProfile, x_max: int, y_max: int,
                             origin: tuple[int, int] = (0, 1), reading: str = "verbatim") -> AsymptoticTable:
    """Fill X and Y forward in (x, y) from the initial cell.

    The initial cell holds ``Y = 1`` (the fault has just occurred) and
    ``X = q(y0)`` for a cyber-initiated fault.  Cells below or left of the
    origin stay 0.  Each term's coefficient uses the predecessor cell it
    multiplies as its "previous" state; in the ``verbatim`` reading the third
    term of X repeats the (x-1, y-1) predecessor, in ``corrected`` it uses
    (x, y-1).  Terms with a zero predecessor are skipped, so singular
    coefficients only raise when they matter.  Out-of-range values are
    clamped to [0, 1] and logged.
    """
    if reading not in READINGS:
        raise ValueError(f"reading must be one of {READINGS}")
    x0, y0 = origin
    if not (0 <= x0 <= x_max and 0 <= y0 <= y_max):
        raise ValueError("origin lies outside the grid")
    X = np.zeros((x_max + 1, y_max + 1))
    Y = np.zeros((x_max + 1, y_max + 1))
    events: list = []

    def get(arr, x, y):
        if x < x0 or y < y0 or x > x_max or y > y_max:
            return 0.0
        return arr[x, y]

    X[x0, y0] = profile.q_at(y0)
    Y[x0, y0] = 1.0
    for x in range(x0, x_max + 1):
        for y in range(y0, y_max + 1):
            if (x, y) == (x0, y0):
                continue
            xv = 0.0
            a = get(X, x - 1, y)
            if a:
                xv += alpha1(x, y, profile, x - 1, y) * a
            b = get(X, x - 1, y - 1)
            if b:
                xv += alpha2(x, y, profile, x - 1, y - 1) * b
            if reading == "verbatim":
                if b:
                    xv += alpha3(x, y, profile, x - 1, y - 1) * b
            else:
                c = get(X, x, y - 1)
                if c:
                    xv += alpha3(x, y, profile, x, y - 1) * c
            yv = 0.0
            if a:
                yv += alpha4(x, y, profile, x - 1, y) * a
            e = get(Y, x - 1, y - 1)
            if e:
                yv += alpha5(x, y, profile, x - 1, y - 1) * e
            X[x, y] = _clamp(xv, "X", x, y, events)
            Y[x, y] = _clamp(yv, "Y", x, y, events)
    if events:
        log.info("%d recursion values clamped to [0, 1] (%s reading)", len(events), reading)
    return AsymptoticTable(X, Y, reading, origin, events)


def split_probabilities(table: AsymptoticTable, min_size: int = 1, max_size: int | None = None) -> list[dict]:
    """Rows (size, cyber, physical, probability) for every cell of the table."""
    top = max_size if max_size is not None else table.x_max + table.y_max
    rows = []
    for size in range(min_size, top + 1):
        for y in range(size, -1, -1):
            x = size - y
            if x > table.x_max or y > table.y_max:
                continue
            rows.append({"size": size, "cyber": y, "physical": x, "probability": table.absorb(x, y)})
    return rows


def region_probability(region: Region, table: AsymptoticTable, net: CoupledNetwork,
                       counts: AdmissibleCounts | None = None, initial: Iterable[NodeId] | None = None) -> float:
    """Probability that the cascade ends with exactly ``region`` failed.

    The count-level probability ``X(x, y)`` is shared evenly among the
    admissible regions with that split; inadmissible regions get 0.  With a
    known ``initial`` fault only regions containing it are admissible, and
    ``counts`` must have been computed for that source.
    """
    init = tuple(initial) if initial is not None else None
    if init is not None and not set(init) <= set(region.nodes()):
        return 0.0
    if not is_admissible(region, net, init):
        return 0.0
    y, x = region.split
    px = table.absorb(x, y)
    if px == 0.0:
        return 0.0
    if counts is None:
        sources = None if init is None else frozenset(net.flat(v) for v in init)
        counts = AdmissibleCounts.for_network(net, region.size, sources=sources)
    n = counts.get(x, y)
    return px / n if n > 0 else 0.0


def fixed_transfer_probability(size: int, rate: float = 0.35, mean_degree: float = 4.0) -> float:
    """Baseline with one fixed risk-transfer rate.

    The region grows with ``rate`` per added node and stops when none of its
    boundary nodes is hit; for a tree-like region in a graph of mean degree
    k the boundary has ``(k - 2) * size + 2`` nodes.  Depends on size only.
    """
    if not 0.0 < rate < 1.0:
        raise ValueError("rate must lie in (0, 1)")
    if size < 1:
        raise ValueError("size must be >= 1")
    boundary = max(0.0, (mean_degree - 2.0) * size + 2.0)
    return rate ** (size - 1) * (1.0 - rate) ** boundary


# ---------------------------------------------------------------------------
# estimation from traces

def _failure_events(snaps: Sequence[Snapshot]) -> list[Snapshot]:
    """Snapshots right after new failures (the first one is the initial fault)."""
    out = [snaps[0]]
    for s in snaps[1:]:
        if (s.X, s.Y) != (out[-1].X, out[-1].Y):
            out.append(s)
    return out


def _smooth(num: dict[int, float], den: dict[int, float], size: int, default: float) -> tuple[float, ...]:
    seen = sorted(k for k, v in den.items() if v > 0)
    vals = []
    for k in range(size):
        if k in den and den[k] > 0:
            vals.append(num.get(k, 0.0) / den[k])
        elif seen:
            nearest = min(seen, key=lambda s: (abs(s - k), s))
            vals.append(num.get(nearest, 0.0) / den[nearest])
        else:
            vals.append(default)
    return tuple(vals)


def estimate_profile(traces: Iterable[CascadeTrace | Sequence[Snapshot]], x_max: int | None = None,
                     y_max: int | None = None, floor: float = 0.0) -> RecoveryProfile:
    """Frequency estimates of p, q, d from simulated or recorded cascades.

    Each failure event (initial fault included) is a transition state; it
    absorbs when no further failure follows.  ``p(x)`` uses events whose last
    failure was physical, ``q(y)`` those whose last failure was cyber, and
    ``d(y)`` is the share of non-final events at cyber count y whose next
    event adds physical failures.  Counts without data copy the nearest
    observed count (ties: lower).  ``floor`` lifts every value to at least
    that much, which keeps the recursion free of zero denominators.
    """
    pn: dict[int, float] = {}
    pd_: dict[int, float] = {}
    qn: dict[int, float] = {}
    qd: dict[int, float] = {}
    dn: dict[int, float] = {}
    dd: dict[int, float] = {}
    top_x = top_y = 0
    any_trace = False
    for tr in traces:
        any_trace = True
        snaps = tr.snapshots if isinstance(tr, CascadeTrace) else list(tr)
        truncated = tr.truncated if isinstance(tr, CascadeTrace) else snaps[-1].K == 1
        ev = _failure_events(snaps)
        for k, s in enumerate(ev):
            top_x, top_y = max(top_x, s.X), max(top_y, s.Y)
            last = k == len(ev) - 1
            if last and truncated:
                continue
            absorbed = 1.0 if last else 0.0
            if s.L == 0:
                pd_[s.X] = pd_.get(s.X, 0.0) + 1
                pn[s.X] = pn.get(s.X, 0.0) + absorbed
            else:
                qd[s.Y] = qd.get(s.Y, 0.0) + 1
                qn[s.Y] = qn.get(s.Y, 0.0) + absorbed
            if not last:
                dd[s.Y] = dd.get(s.Y, 0.0) + 1
                dn[s.Y] = dn.get(s.Y, 0.0) + (1.0 if ev[k + 1].X > s.X else 0.0)
    if not any_trace:
        raise ValueError("need at least one trace")
    nx_ = (x_max if x_max is not None else top_x) + 1
    ny_ = (y_max if y_max is not None else top_y) + 1
    p = _smooth(pn, pd_, nx_, 1.0)
    q = _smooth(qn, qd, ny_, 1.0)
    d = _smooth(dn, dd, ny_, 0.0)
    if floor > 0:
        p, q, d = (tuple(max(floor, v) for v in arr) for arr in (p, q, d))
    return RecoveryProfile(p, q, d)


def count_frequencies(traces: Iterable[CascadeTrace]) -> dict[tuple[int, int], float]:
    """Empirical distribution of final (physical, cyber) counts."""
    counts: dict[tuple[int, int], float] = {}
    total = 0
    for tr in traces:
        total += 1
        if tr.truncated:
            continue
        y, x = tr.region.split
        counts[(x, y)] = counts.get((x, y), 0.0) + 1
    return {k: v / total for k, v in sorted(counts.items())}


def reading_discrepancy(table: AsymptoticTable, freqs: dict[tuple[int, int], float]) -> float:
    """Sum of absolute differences between X and observed count frequencies."""
    keys = set(freqs)
    keys.update((x, y) for x in range(table.x_max + 1) for y in range(table.y_max + 1))
    return float(sum(abs(table.absorb(x, y) - freqs.get((x, y), 0.0)) for x, y in keys))


def arbitrate_reading(profile: RecoveryProfile, traces: Sequence[CascadeTrace], x_max: int, y_max: int,
                      origin: tuple[int, int] = (0, 1)) -> tuple[str, dict[str, float]]:
    """Pick the recursion reading whose X table sits closest to simulation."""
    freqs = count_frequencies(traces)
    scores = {
        r: reading_discrepancy(asymptotic_probabilities(profile, x_max, y_max, origin, r), freqs)
        for r in READINGS
    }
    best = min(READINGS, key=lambda r: (scores[r], READINGS.index(r)))
    return best, scores


def sample_aggregate_traces(profile: RecoveryProfile, n_traces: int, rng_seed: int = 0,
                            max_steps: int = 1000) -> list[list[Snapshot]]:
    """Count-level traces of the chain a profile describes.

    After a physical failure the chain absorbs with p(x), after a cyber one
    with q(y); otherwise the next failure is physical with probability d(y).
    Traces start from one cyber fault.  Snapshots carry empty node sets.
    """
    rng = np.random.default_rng(rng_seed)
    empty = Region.of([])
    out = []
    for _ in range(n_traces):
        x, y, last = 0, 1, 1
        snaps = []
        for n in range(max_steps):
            stop = profile.q_at(y) if last == 1 else profile.p_at(x)
            absorbed = rng.random() < stop
            snaps.append(Snapshot(n, x, y, 1 if absorbed else 0, last, 0 if absorbed else 1, empty))
            if absorbed:
                break
            if rng.random() < profile.d_at(y):
                x, last = x + 1, 0
            else:
                y, last = y + 1, 1
        out.append(snaps)
    return out
