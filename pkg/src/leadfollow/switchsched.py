"""Piecewise-constant switching signals over a finite set of graphs.

A schedule is a list of contiguous intervals starting at ``t = 0``. Each
interval is split into segments, and during a segment one graph is
active. The signal is right-continuous: at a switch instant the incoming
graph is already active.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import graphtop
from .graphtop import LeaderGraph
from .matrixkit import Matrix

__all__ = [
    "Interval",
    "SwitchingSchedule",
    "IntervalCheck",
    "ValidationReport",
    "DeltaEstimate",
    "active_graph",
    "validate",
    "averaged_structure",
    "dwell_fractions",
    "simplex_points",
    "estimate_delta_bar",
    "steps_per_dwell",
]

TIME_TOL = 1e-9


@dataclass(frozen=True)
class Interval:
    """One averaging interval: a tuple of ``(graph_index, dwell)`` segments."""

    segments: tuple[tuple[int, float], ...]

    def __post_init__(self):
        segs = tuple((int(g), float(d)) for g, d in self.segments)
        if not segs:
            raise ValueError("an interval needs at least one segment")
        for g, d in segs:
            if not (np.isfinite(d) and d > 0):
                raise ValueError(f"dwell times must be positive, got {d}")
        object.__setattr__(self, "segments", segs)

    @property
    def length(self) -> float:
        return math.fsum(d for _, d in self.segments)

    @property
    def graph_indices(self) -> tuple[int, ...]:
        return tuple(g for g, _ in self.segments)

    @property
    def dwells(self) -> tuple[float, ...]:
        return tuple(d for _, d in self.segments)


@dataclass(frozen=True)
class SwitchingSchedule:
    graphs: tuple[LeaderGraph, ...]
    intervals: tuple[Interval, ...]
    periodic: bool = False
    _bounds: tuple[float, ...] = field(init=False, repr=False, compare=False)
    _seg_bounds: tuple[float, ...] = field(init=False, repr=False, compare=False)
    _seg_graphs: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        graphs = tuple(self.graphs)
        intervals = tuple(
            iv if isinstance(iv, Interval) else Interval(tuple(iv)) for iv in self.intervals
        )
        if not graphs:
            raise ValueError("schedule needs at least one graph")
        if not intervals:
            raise ValueError("schedule needs at least one interval")
        graphtop._shared_n(graphs)
        for k, iv in enumerate(intervals):
            for g in iv.graph_indices:
                if not 0 <= g < len(graphs):
                    raise ValueError(f"interval {k} references graph {g}, have {len(graphs)}")
        object.__setattr__(self, "graphs", graphs)
        object.__setattr__(self, "intervals", intervals)

        bounds = [0.0]
        seg_bounds = [0.0]
        seg_graphs = []
        for iv in intervals:
            for g, d in iv.segments:
                seg_graphs.append(g)
                seg_bounds.append(seg_bounds[-1] + d)
            bounds.append(seg_bounds[-1])
        object.__setattr__(self, "_bounds", tuple(bounds))
        object.__setattr__(self, "_seg_bounds", tuple(seg_bounds))
        object.__setattr__(self, "_seg_graphs", tuple(seg_graphs))

    @classmethod
    def cyclic(cls, graphs: Sequence[LeaderGraph], dwell: float, group: int) -> "SwitchingSchedule":
        """Visit the graphs in order, ``dwell`` each, ``group`` per interval, forever."""
        if len(graphs) % group:
            raise ValueError("number of graphs must be a multiple of the group size")
        intervals = [
            Interval(tuple((k, dwell) for k in range(s, s + group)))
            for s in range(0, len(graphs), group)
        ]
        return cls(tuple(graphs), tuple(intervals), periodic=True)

    @classmethod
    def from_dict(cls, obj, graphs: Sequence[LeaderGraph] | None = None) -> "SwitchingSchedule":
        if graphs is None:
            graphs = [LeaderGraph.from_dict(g) for g in obj["graphs"]]
        intervals = []
        for k, iv in enumerate(obj["intervals"]):
            segs = iv["segments"] if isinstance(iv, dict) else iv
            try:
                intervals.append(Interval(tuple((g, d) for g, d in segs)))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"intervals[{k}]: {exc}") from None
        return cls(tuple(graphs), tuple(intervals), bool(obj.get("periodic", False)))

    def to_dict(self) -> dict:
        return {
            "graphs": [g.to_dict() for g in self.graphs],
            "intervals": [{"segments": [list(s) for s in iv.segments]} for iv in self.intervals],
            "periodic": self.periodic,
        }

    @property
    def n_followers(self) -> int:
        return self.graphs[0].n_followers

    @property
    def period(self) -> float:
        """Length of one pass through the interval list."""
        return self._bounds[-1]

    def interval_start(self, k: int) -> float:
        return self._bounds[k]

    def segments(self) -> Iterator[tuple[float, float, int]]:
        """Yield ``(start, end, graph_index)`` for one pass of the list."""
        for a, b, g in zip(self._seg_bounds, self._seg_bounds[1:], self._seg_graphs):
            yield a, b, g

    def segment_trace(self, horizon: float) -> list[tuple[float, int]]:
        """``(switch_time, graph_index)`` pairs covering ``[0, horizon)``."""
        out = []
        offset = 0.0
        while offset < horizon:
            for a, _, g in self.segments():
                if offset + a >= horizon:
                    break
                out.append((offset + a, g))
            if not self.periodic:
                break
            offset += self.period
        return out


def active_graph(s: SwitchingSchedule, t: float) -> int:
    """Index of the graph active at time ``t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t >= s.period:
        if not s.periodic:
            raise ValueError(f"t = {t} is beyond the schedule horizon {s.period}")
        t = math.fmod(t, s.period)
    k = bisect.bisect_right(s._seg_bounds, t) - 1
    return s._seg_graphs[min(k, len(s._seg_graphs) - 1)]


@dataclass(frozen=True)
class IntervalCheck:
    index: int
    start: float
    length: float
    length_ok: bool
    dwell_ok: bool
    connected: bool
    unreachable: tuple[int, ...]

    @property
    def passed(self) -> bool:
        return self.length_ok and self.dwell_ok and self.connected


@dataclass(frozen=True)
class ValidationReport:
    t_max: float
    tau_min: float
    checks: tuple[IntervalCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed_intervals(self) -> list[int]:
        return [c.index for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        out = [f"joint-connectivity check: T_max = {self.t_max:g} s, tau_min = {self.tau_min:g} s"]
        for c in self.checks:
            problems = []
            if not c.length_ok:
                problems.append(f"length {c.length:g} > T_max")
            if not c.dwell_ok:
                problems.append("dwell below tau_min")
            if not c.connected:
                problems.append(f"followers {list(c.unreachable)} unreachable from leader")
            status = "ok" if c.passed else "FAIL: " + "; ".join(problems)
            out.append(f"  interval {c.index} [t={c.start:g}, len={c.length:g}]: {status}")
        out.append("PASS" if self.passed else f"FAIL (intervals {self.failed_intervals})")
        return out

    def __str__(self) -> str:
        return "\n".join(self.lines())


def validate(s: SwitchingSchedule, t_max: float, tau_min: float) -> ValidationReport:
    """Check interval lengths, dwell floors and joint connectivity per interval.

    Failures are recorded in the report, never raised.
    """
    checks = []
    for k, iv in enumerate(s.intervals):
        u = graphtop.union([s.graphs[g] for g in iv.graph_indices])
        missing = tuple(graphtop.unreachable(u))
        checks.append(
            IntervalCheck(
                index=k,
                start=s.interval_start(k),
                length=iv.length,
                length_ok=iv.length <= t_max + TIME_TOL,
                dwell_ok=all(d >= tau_min - TIME_TOL for d in iv.dwells),
                connected=not missing,
                unreachable=missing,
            )
        )
    return ValidationReport(float(t_max), float(tau_min), tuple(checks))


def dwell_fractions(iv: Interval) -> np.ndarray:
    d = np.asarray(iv.dwells)
    return d / d.sum()


def _weighted_h(s: SwitchingSchedule, iv: Interval, taus) -> Matrix:
    hs = [s.graphs[g].h for g in iv.graph_indices]
    out = np.zeros_like(hs[0])
    for tau, h in zip(taus, hs):
        out += tau * h
    return out


def averaged_structure(s: SwitchingSchedule, k: int) -> Matrix:
    """Dwell-weighted average of the structure matrices over interval ``k``."""
    iv = s.intervals[k]
    out = _weighted_h(s, iv, dwell_fractions(iv))
    out.setflags(write=False)
    return out


def simplex_points(m: int, floor: float, strategy) -> np.ndarray:
    """Sample points of ``{tau : sum(tau) = 1, tau_j >= floor}``.

    ``strategy`` is ``"vertex"``, ``("grid", resolution)`` or
    ``("random", n, seed)``. Grid points are ``floor + free * w`` with ``w``
    on the regular lattice of step ``1/round(1/resolution)``, so halving
    the resolution yields a superset of points.
    """
    if m < 1:
        raise ValueError("need at least one segment")
    free = 1.0 - m * floor
    if free < -1e-12:
        raise ValueError(f"floor {floor} infeasible for {m} segments")
    if m == 1:
        return np.ones((1, 1))
    if free <= 1e-12:
        return np.full((1, m), 1.0 / m)
    name, *args = (strategy,) if isinstance(strategy, str) else tuple(strategy)
    if name == "vertex":
        w = np.eye(m)
    elif name == "grid":
        (res,) = args
        r = max(1, round(1.0 / res))
        w = np.array(
            [c for c in itertools.product(range(r + 1), repeat=m - 1) if sum(c) <= r],
            dtype=float,
        )
        w = np.hstack([w, r - w.sum(axis=1, keepdims=True)]) / r
    elif name == "random":
        n, seed = args
        rng = np.random.default_rng(seed)
        w = np.vstack([np.eye(m), rng.dirichlet(np.ones(m), size=int(n))])
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return floor + free * w


@dataclass(frozen=True)
class DeltaEstimate:
    """Sampled estimate of the worst least-real-part over all intervals.

    The true infimum can only be smaller: this is a minimum over samples.
    """

    value: float
    samples: int
    per_interval_min: tuple[float, ...]
    strategy: object = None
    sample_based: bool = True

    @property
    def ok(self) -> bool:
        return self.value > 0


def estimate_delta_bar(
    s: SwitchingSchedule, strategy=("grid", 0.05), tau_min: float | None = None
) -> DeltaEstimate:
    """Estimate the positive lower bound on ``Re lambda_min`` of averaged ``H``.

    For every interval, evaluates the least real eigenvalue part of
    ``sum_j tau_j H_j`` over sampled dwell fractions with
    ``tau_j >= tau_min / length``. ``tau_min`` defaults to the shortest
    dwell in the schedule. Intervals with identical graph sequence and
    floor are evaluated once.
    """
    if tau_min is None:
        tau_min = min(min(iv.dwells) for iv in s.intervals)
    cache: dict[tuple, float] = {}
    per = []
    total = 0
    for iv in s.intervals:
        m = len(iv.segments)
        floor = min(tau_min / iv.length, 1.0 / m)
        key = (iv.graph_indices, round(floor, 12))
        if key not in cache:
            pts = simplex_points(m, floor, strategy)
            total += len(pts)
            cache[key] = min(graphtop.min_real_eig(_weighted_h(s, iv, p)) for p in pts)
        per.append(cache[key])
    return DeltaEstimate(float(min(per)), total, tuple(per), strategy)


def steps_per_dwell(s: SwitchingSchedule, step: float) -> list[int]:
    """Integer step counts for every segment; rejects dwells off the grid."""
    out = []
    for iv in s.intervals:
        for _, d in iv.segments:
            n = round(d / step)
            if n < 1 or abs(n * step - d) > TIME_TOL * max(1.0, d):
                raise ValueError(f"dwell {d} is not a multiple of the step {step}")
            out.append(n)
    return out
