"""Closed-loop network matrices and fixed-step simulation.

Stacked error coordinates are ``eps = (x_1 - x_0, ..., x_N - x_0)``. Under
the protocol ``u_i = K z_i`` they evolve as

    eps' = (I_N (x) A - H_sigma(t) (x) B K) eps.

With the observer-based protocol, ``(eps, e)`` with ``e = eps_hat - eps``
is block upper-triangular, which is what makes the controller and
observer designs separable.

Simulation is classic RK4 with a fixed step on ``(x0, eps[, eps_hat])``;
follower states are rebuilt as ``x0 + eps`` for the logs. Every dwell
time must be a whole number of steps, so the graph never switches inside
a step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .gainsynth import AgentModel, GainSet
from .matrixkit import Matrix, as_matrix, as_square, eigenvalues, is_hurwitz, kron
from .switchsched import SwitchingSchedule, averaged_structure, steps_per_dwell

__all__ = [
    "MODES",
    "SimulationOverflow",
    "InitialCondition",
    "SimState",
    "TrajectoryLog",
    "error_system_matrix",
    "averaged_system_matrix",
    "observer_system_matrix",
    "coupled_observer_matrix",
    "rk4_step",
    "simulate",
    "integrate_error_system",
    "consensus_error",
    "cascade_trajectory",
    "cascade_decay_probe",
    "fast_switching_probe",
    "summarize",
    "write_trajectory_csv",
    "write_error_norms_csv",
]

MODES = ("state_feedback", "observer")
MAX_SAMPLES = 100_000


class SimulationOverflow(ArithmeticError):
    def __init__(self, t: float):
        super().__init__(f"state became non-finite at t = {t:g}")
        self.t = t


def _check_dims(model: AgentModel, mat: Matrix, rows: int, cols: int, name: str):
    if mat.shape != (rows, cols):
        raise ValueError(f"{name} has shape {mat.shape}, expected {(rows, cols)}")


def error_system_matrix(model: AgentModel, k, h) -> Matrix:
    """``I_N (x) A - H (x) (B K)``."""
    k = as_matrix(k, "K")
    h = as_square(h, "H")
    _check_dims(model, k, model.m, model.n, "K")
    n_agents = h.shape[0]
    return kron(np.eye(n_agents), model.a) - kron(h, model.b @ k)


def averaged_system_matrix(model: AgentModel, k, s: SwitchingSchedule, idx: int) -> Matrix:
    """Error-system matrix at the dwell-averaged structure matrix of interval ``idx``."""
    return error_system_matrix(model, k, averaged_structure(s, idx))


def _observer_blocks(model: AgentModel, gains: GainSet, h):
    if model.c is None:
        raise ValueError("observer mode needs an output matrix C")
    if not gains.has_observer:
        raise ValueError("observer mode needs gains F and K_o")
    h = as_square(h, "H")
    _check_dims(model, gains.f, model.m, model.n, "F")
    _check_dims(model, gains.k_o, model.n, model.p, "K_o")
    eye = np.eye(h.shape[0])
    bf = model.b @ gains.f
    koc = gains.k_o @ model.c
    return eye, h, bf, koc


def observer_system_matrix(model: AgentModel, gains: GainSet, h) -> Matrix:
    """Closed loop in ``(eps, e)`` coordinates: block upper-triangular."""
    eye, h, bf, koc = _observer_blocks(model, gains, h)
    a = model.a
    top = np.hstack([kron(eye, a + bf), kron(eye, bf)])
    bottom = np.hstack([np.zeros_like(top[:, : top.shape[0]]), kron(eye, a) - kron(h, koc)])
    return np.vstack([top, bottom])


def coupled_observer_matrix(model: AgentModel, gains: GainSet, h) -> Matrix:
    """Closed loop in ``(eps, eps_hat)`` coordinates, before the change to ``e``."""
    eye, h, bf, koc = _observer_blocks(model, gains, h)
    a = model.a
    top = np.hstack([kron(eye, a), kron(eye, bf)])
    bottom = np.hstack([kron(h, koc), kron(eye, a + bf) - kron(h, koc)])
    return np.vstack([top, bottom])


def _full_state_matrix(model: AgentModel, gains: GainSet, h, mode: str) -> Matrix:
    """Dynamics of the stacked vector ``(x0, x, [eps_hat])`` for one graph.

    The leader runs open loop. Followers use ``u_i = K z_i`` with
    ``z_i = sum_j a_ij (x_j - x_i) + d_i (x0 - x_i)``, or ``u_i = F eps_hat_i``
    in observer mode, where each observer is driven by the output
    disagreement ``K_o (zhat_i - z_i)``.
    """
    h = as_square(h, "H")
    n, n_ag = model.n, h.shape[0]
    a = model.a
    lead = h.sum(axis=1, keepdims=True)  # H 1 = leader-link weights
    eye = np.eye(n_ag)
    if mode == "state_feedback":
        bk = model.b @ gains.k
        dim = n * (n_ag + 1)
        m = np.zeros((dim, dim))
        m[:n, :n] = a
        m[n:, :n] = kron(lead, bk)
        m[n:, n:] = kron(eye, a) - kron(h, bk)
        return m
    if mode == "observer":
        _, _, bf, koc = _observer_blocks(model, gains, h)
        nn = n * n_ag
        dim = n + 2 * nn
        m = np.zeros((dim, dim))
        xs, hs = slice(n, n + nn), slice(n + nn, dim)
        m[:n, :n] = a
        m[xs, xs] = kron(eye, a)
        m[xs, hs] = kron(eye, bf)
        # eps_hat' = (H (x) KoC)(x - 1 (x) x0) + (I (x) (A+BF) - H (x) KoC) eps_hat
        m[hs, :n] = -kron(lead, koc)
        m[hs, xs] = kron(h, koc)
        m[hs, hs] = kron(eye, a + bf) - kron(h, koc)
        return m
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def _error_coordinates_matrix(model: AgentModel, gains: GainSet, h, mode: str) -> Matrix:
    """Dynamics of ``(x0, eps, [eps_hat])``: the leader block decouples.

    Integrating errors directly avoids forming ``x_i - x_0`` from large,
    nearly equal states when the leader itself is unstable.
    """
    h = as_square(h, "H")
    if mode == "state_feedback":
        tail = error_system_matrix(model, gains.k, h)
    elif mode == "observer":
        tail = coupled_observer_matrix(model, gains, h)
    else:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    n = model.n
    m = np.zeros((n + tail.shape[0],) * 2)
    m[:n, :n] = model.a
    m[n:, n:] = tail
    return m


def observer_agent_rhs(model: AgentModel, gains: GainSet, graph, x0, x, eps_hat):
    """Per-agent observer protocol, for cross-checking the stacked form.

    ``zhat_i`` uses a minus sign on the leader term,
    ``sum_j (C eps_hat_j - C eps_hat_i) - d_i C eps_hat_i``, which is the
    sign that reproduces the stacked ``-H (x) K_o C`` structure.
    """
    a, b, c = model.a, model.b, model.c
    f, k_o = gains.f, gains.k_o
    n_ag = graph.n_followers
    dx = np.zeros_like(x)
    dhat = np.zeros_like(eps_hat)
    nbrs: dict[int, list[tuple[int, float]]] = {}
    for (j, i), w in graph.edges.items():
        nbrs.setdefault(i, []).append((j, w))
    for i in range(1, n_ag + 1):
        d_i = graph.leader_links.get(i, 0.0)
        z = d_i * (c @ x0 - c @ x[i - 1])
        zhat = -d_i * (c @ eps_hat[i - 1])
        for j, w in nbrs.get(i, ()):
            z = z + w * (c @ x[j - 1] - c @ x[i - 1])
            zhat = zhat + w * (c @ eps_hat[j - 1] - c @ eps_hat[i - 1])
        u = f @ eps_hat[i - 1]
        dx[i - 1] = a @ x[i - 1] + b @ u
        dhat[i - 1] = a @ eps_hat[i - 1] + k_o @ (zhat - z) + b @ u
    return a @ x0, dx, dhat


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _linear_rk4(m: np.ndarray, y: np.ndarray, h: float) -> np.ndarray:
    k1 = m @ y
    k2 = m @ (y + 0.5 * h * k1)
    k3 = m @ (y + 0.5 * h * k2)
    k4 = m @ (y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _step_plan(s: SwitchingSchedule, step: float, horizon: float, time_scale: float):
    """List of ``(graph_index, n_steps)`` runs covering ``[0, horizon]``."""
    total = round(horizon / step)
    if total < 1 or abs(total * step - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not a positive multiple of the step {step}")
    counts = steps_per_dwell(s, step * time_scale)
    graphs = [g for iv in s.intervals for g, _ in iv.segments]
    plan = []
    done = 0
    while done < total:
        for g, c in zip(graphs, counts):
            c = min(c, total - done)
            plan.append((g, c))
            done += c
            if done >= total:
                break
        else:
            if not s.periodic:
                raise ValueError(f"horizon {horizon} exceeds the non-periodic schedule")
    return plan, total


def _integrate(matrices: dict[int, np.ndarray], plan, total: int, y0: np.ndarray, step: float,
               max_samples: int = MAX_SAMPLES):
    stride = max(1, math.ceil((total + 1) / max_samples))
    n_keep = total // stride + 1 + (1 if total % stride else 0)
    ys = np.empty((n_keep, y0.size))
    ts = np.empty(n_keep)
    trace = np.empty(n_keep, dtype=int)
    y = y0.copy()
    ys[0], ts[0], trace[0] = y, 0.0, plan[0][0]
    row, i = 1, 0
    with np.errstate(over="ignore", invalid="ignore"):
        for g, count in plan:
            m = matrices[g]
            for _ in range(count):
                y = _linear_rk4(m, y, step)
                i += 1
                if not np.all(np.isfinite(y)):
                    raise SimulationOverflow(i * step)
                if i % stride == 0 or i == total:
                    ys[row], ts[row], trace[row] = y, i * step, g
                    row += 1
    return ts[:row], ys[:row], trace[:row]


@dataclass(frozen=True)
class InitialCondition:
    x0: np.ndarray
    x: np.ndarray
    eps_hat: Optional[np.ndarray] = None

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if x.shape[1] != x0.size:
            raise ValueError(f"follower states have {x.shape[1]} components, leader has {x0.size}")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "x", x)
        if self.eps_hat is not None:
            eh = np.atleast_2d(np.asarray(self.eps_hat, dtype=float))
            if eh.shape != x.shape:
                raise ValueError(f"eps_hat has shape {eh.shape}, expected {x.shape}")
            object.__setattr__(self, "eps_hat", eh)

    @classmethod
    def random(cls, rng: np.random.Generator, n: int, n_followers: int, scale: float = 1.0,
               observer: bool = False) -> "InitialCondition":
        x0 = rng.normal(scale=scale, size=n)
        x = rng.normal(scale=scale, size=(n_followers, n))
        eh = rng.normal(scale=scale, size=(n_followers, n)) if observer else None
        return cls(x0, x, eh)


@dataclass(frozen=True)
class SimState:
    t: float
    x0: np.ndarray
    x: np.ndarray
    eps: np.ndarray
    eps_hat: Optional[np.ndarray] = None
    e: Optional[np.ndarray] = None


@dataclass(frozen=True)
class TrajectoryLog:
    """Time series of a run. Arrays are indexed ``[time, agent, component]``."""

    mode: str
    times: np.ndarray
    x0: np.ndarray
    x: np.ndarray
    eps: np.ndarray
    consensus_error: np.ndarray
    schedule_trace: np.ndarray
    eps_hat: Optional[np.ndarray] = None
    err: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> SimState:
        return SimState(
            float(self.times[i]), self.x0[i], self.x[i], self.eps[i],
            None if self.eps_hat is None else self.eps_hat[i],
            None if self.err is None else self.err[i],
        )

    @property
    def terminal(self) -> SimState:
        return self.state(-1)

    @property
    def observer_error(self) -> Optional[np.ndarray]:
        """Per-time max over agents of ``||eps_hat_i - eps_i||``."""
        if self.err is None:
            return None
        return np.linalg.norm(self.err, axis=2).max(axis=1)


def simulate(
    model: AgentModel,
    gains: GainSet,
    s: SwitchingSchedule,
    init: InitialCondition,
    step: float = 1e-3,
    horizon: float = 30.0,
    mode: str = "state_feedback",
    time_scale: float = 1.0,
    max_samples: int = MAX_SAMPLES,
) -> TrajectoryLog:
    """Simulate leader and followers under the switching schedule.

    ``time_scale`` compresses the switching signal to ``sigma(alpha t)``;
    each dwell then lasts ``dwell / alpha`` and must still be a whole
    number of steps. Logs keep every step up to ``max_samples`` points,
    then thin uniformly; the terminal state is always kept.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if step <= 0 or horizon <= 0 or time_scale <= 0:
        raise ValueError("step, horizon and time_scale must be positive")
    n, n_ag = model.n, s.n_followers
    if init.x0.size != n or init.x.shape != (n_ag, n):
        raise ValueError(f"initial states must be x0: ({n},), x: ({n_ag}, {n})")
    plan, total = _step_plan(s, step, horizon, time_scale)
    used = {g for g, _ in plan}
    mats = {g: _error_coordinates_matrix(model, gains, s.graphs[g].h, mode) for g in used}

    parts = [init.x0, (init.x - init.x0).ravel()]
    if mode == "observer":
        eh = init.eps_hat if init.eps_hat is not None else np.zeros((n_ag, n))
        parts.append(eh.ravel())
    y0 = np.concatenate(parts)
    ts, ys, trace = _integrate(mats, plan, total, y0, step, max_samples)

    x0 = ys[:, :n]
    eps = ys[:, n : n + n * n_ag].reshape(-1, n_ag, n)
    x = eps + x0[:, None, :]
    eps_hat = err = None
    if mode == "observer":
        eps_hat = ys[:, n + n * n_ag :].reshape(-1, n_ag, n)
        err = eps_hat - eps
    cerr = np.linalg.norm(eps, axis=2).max(axis=1)
    return TrajectoryLog(mode, ts, x0, x, eps, cerr, trace, eps_hat, err)


def integrate_error_system(
    model: AgentModel,
    k,
    s: SwitchingSchedule,
    eps0,
    step: float = 1e-3,
    horizon: float = 30.0,
    time_scale: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the stacked error system directly; returns ``(times, eps)``."""
    plan, total = _step_plan(s, step, horizon, time_scale)
    mats = {g: error_system_matrix(model, k, s.graphs[g].h) for g, _ in plan}
    eps0 = np.asarray(eps0, dtype=float).ravel()
    ts, ys, _ = _integrate(mats, plan, total, eps0, step)
    return ts, ys.reshape(len(ts), s.n_followers, model.n)


def consensus_error(log: TrajectoryLog) -> np.ndarray:
    """Per-time ``max_i ||x_i - x_0||``."""
    if len(log) == 0:
        raise ValueError("empty log")
    return np.linalg.norm(log.x - log.x0[:, None, :], axis=2).max(axis=1)


def cascade_trajectory(a1, a2, y0, rate: float, x_init, step: float = 1e-3, horizon: float = 10.0):
    """Integrate ``x' = A1 x + A2 y(t)`` with ``y(t) = y0 exp(-rate t)``."""
    a1 = as_square(a1, "A1")
    if not is_hurwitz(a1):
        raise ValueError("A1 must be Hurwitz")
    a2 = as_matrix(a2, "A2")
    y0 = np.asarray(y0, dtype=float).ravel()
    x = np.asarray(x_init, dtype=float).ravel()
    if a2.shape != (a1.shape[0], y0.size) or x.size != a1.shape[0]:
        raise ValueError("dimension mismatch in cascade probe")
    total = round(horizon / step)

    def f(t, x):
        return a1 @ x + a2 @ (y0 * math.exp(-rate * t))

    xs = np.empty((total + 1, x.size))
    xs[0] = x
    for i in range(total):
        x = rk4_step(f, i * step, x, step)
        xs[i + 1] = x
    return np.arange(total + 1) * step, xs


def cascade_decay_probe(a1, a2, y0, rate, x_init, step=1e-3, horizon=10.0, threshold=1e-2) -> bool:
    """True when ``||x(horizon)|| < threshold`` for the cascade above."""
    _, xs = cascade_trajectory(a1, a2, y0, rate, x_init, step, horizon)
    return bool(np.linalg.norm(xs[-1]) < threshold)


def fast_switching_probe(model, gains, s, alpha: float, init, step=1e-3, horizon=30.0,
                         mode="state_feedback") -> TrajectoryLog:
    """:func:`simulate` with the switching signal compressed by ``alpha``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return simulate(model, gains, s, init, step, horizon, mode, time_scale=alpha)


def summarize(log: TrajectoryLog, model: AgentModel, gains: GainSet, s: SwitchingSchedule,
              threshold: float = 1e-3) -> dict:
    """Terminal metrics plus per-interval averaged-system abscissas."""
    e0 = float(log.consensus_error[0])
    e1 = float(log.consensus_error[-1])
    ratio = e1 / e0 if e0 > 0 else (0.0 if e1 == 0 else math.inf)
    out = {
        "mode": log.mode,
        "horizon": float(log.times[-1]),
        "initial_consensus_error": e0,
        "terminal_consensus_error": e1,
        "error_ratio": ratio,
        "threshold": threshold,
        "converged": bool(ratio < threshold),
        "diverged": bool(ratio > 1.0),
        "averaged_abscissa": [
            eigenvalues(averaged_system_matrix(model, gains.k, s, k)).abscissa
            for k in range(len(s.intervals))
        ],
        "schedule_trace": [[t, g] for t, g in s.segment_trace(float(log.times[-1]))],
    }
    if log.err is not None:
        oe = log.observer_error
        out["initial_observer_error"] = float(oe[0])
        out["terminal_observer_error"] = float(oe[-1])
        out["observer_averaged_abscissa"] = [
            eigenvalues(
                kron(np.eye(s.n_followers), model.a)
                - kron(averaged_structure(s, k), gains.k_o @ model.c)
            ).abscissa
            for k in range(len(s.intervals))
        ]
    return out


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_trajectory_csv(log: TrajectoryLog, path, stride: int = 1) -> Path:
    """Tidy CSV ``t,series,index,value``; ``index`` is ``agent.component``.

    The leader is agent 0 and components count from 1.
    """
    path = Path(path)
    series = [("x0", log.x0[:, None, :], 0), ("x", log.x, 1), ("eps", log.eps, 1)]
    if log.eps_hat is not None:
        series += [("eps_hat", log.eps_hat, 1), ("err", log.err, 1)]
    rows = list(range(0, len(log), stride))
    if rows[-1] != len(log) - 1:
        rows.append(len(log) - 1)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "series", "index", "value"])
        for r in rows:
            t = _fmt(log.times[r])
            for name, arr, first in series:
                block = arr[r]
                for a in range(block.shape[0]):
                    for c in range(block.shape[1]):
                        w.writerow([t, name, f"{a + first}.{c + 1}", _fmt(block[a, c])])
    return path


def write_error_norms_csv(log: TrajectoryLog, path, stride: int = 1) -> Path:
    """Compact per-agent ``||x_i - x_0||`` series, one column per follower."""
    path = Path(path)
    norms = np.linalg.norm(log.eps, axis=2)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"agent{i + 1}" for i in range(norms.shape[1])] + ["max"])
        rows = list(range(0, len(log), stride))
        if rows[-1] != len(log) - 1:
            rows.append(len(log) - 1)
        for r in rows:
            w.writerow([_fmt(log.times[r])] + [_fmt(v) for v in norms[r]] + [_fmt(log.consensus_error[r])])
    return path
