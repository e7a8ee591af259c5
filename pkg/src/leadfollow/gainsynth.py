"""Feedback and observer gain synthesis.

The consensus gain comes from the Riccati inequality

    P A + A^T P - 2 delta P B B^T P + I < 0,

made strict by solving the equality with constant term ``(1 + margin) I``
instead of ``I``. Then ``K = B^T P``. The observer gain is the dual design on
``(A^T, C^T)`` and ``F`` is any gain with ``A + B F`` Hurwitz.

All Riccati equations here have the form

    a^T X + X a - gamma X b b^T X + q = 0

and are solved by Newton-Kleinman iteration, each step one Lyapunov solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .matrixkit import (
    EIG_TOL,
    RANK_TOL,
    Matrix,
    as_matrix,
    as_square,
    eigenvalues,
    is_hurwitz,
    rank,
    solve_lyapunov,
)

__all__ = [
    "AgentModel",
    "GainSet",
    "AveragingParams",
    "AssumptionError",
    "RiccatiError",
    "pbh_failures",
    "check_stabilizable",
    "check_detectable",
    "solve_riccati",
    "riccati_residual",
    "observer_residual",
    "synth_feedback",
    "synth_observer",
    "synth_stabilizer",
    "synthesize",
    "solve_alpha_star",
]

DEFAULT_MARGIN = 0.1


class AssumptionError(ValueError):
    """A model fails stabilizability or detectability."""

    def __init__(self, message: str, eigenvalue: complex | None = None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class RiccatiError(ArithmeticError):
    """The Riccati iteration diverged or missed its residual target."""


@dataclass(frozen=True)
class AgentModel:
    """Shared dynamics ``x' = A x + B u``, ``y = C x`` of leader and followers."""

    a: Matrix
    b: Matrix
    c: Optional[Matrix] = None

    def __post_init__(self):
        a = as_square(self.a, "A")
        b = as_matrix(self.b, "B")
        if b.shape[0] != a.shape[0] and b.shape[0] == 1 and b.shape[1] == a.shape[0]:
            # a 1-D B for a single-input system comes in as a row
            b = as_matrix(b.T, "B")
        if b.shape[0] != a.shape[0]:
            raise ValueError(f"B has {b.shape[0]} rows, A is {a.shape[0]}x{a.shape[0]}")
        if rank(b) != b.shape[1]:
            raise ValueError("B must have full column rank")
        c = self.c
        if c is not None:
            c = as_matrix(c, "C")
            if c.shape[1] != a.shape[0]:
                raise ValueError(f"C has {c.shape[1]} columns, A is {a.shape[0]}x{a.shape[0]}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def p(self) -> int:
        if self.c is None:
            raise ValueError("model has no output matrix C")
        return self.c.shape[0]


@dataclass(frozen=True)
class AveragingParams:
    """Growth constants and interval bound for the switching-speed estimate."""

    t_bound: float
    kappa_g: float = 1.0
    kappa_v: float = 1.0
    nu: float = 1.0

    def __post_init__(self):
        for name in ("t_bound", "kappa_g", "kappa_v", "nu"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")


def pbh_failures(a, b, tol: float = RANK_TOL) -> list[complex]:
    """Eigenvalues of ``a`` in the closed right half-plane that fail PBH.

    An eigenvalue ``lam`` fails when ``[a - lam I, b]`` loses row rank.
    """
    a = as_square(a)
    b = as_matrix(b)
    n = a.shape[0]
    bad = []
    for lam in eigenvalues(a).values:
        if lam.real < -EIG_TOL:
            continue
        mat = np.hstack([a - lam * np.eye(n), b.astype(complex)])
        s = np.linalg.svd(mat, compute_uv=False)
        r = int(np.sum(s > tol * max(s[0], 1.0)))
        if r < n:
            bad.append(complex(lam))
    return bad


def check_stabilizable(model: AgentModel) -> bool:
    return not pbh_failures(model.a, model.b)


def check_detectable(model: AgentModel) -> bool:
    if model.c is None:
        raise ValueError("detectability needs an output matrix C")
    return not pbh_failures(model.a.T, model.c.T)


def riccati_residual(p, a, b, delta_bar: float) -> Matrix:
    """``P A + A^T P - 2 delta P B B^T P + I``."""
    p, a, b = np.asarray(p), np.asarray(a), np.asarray(b)
    pb = p @ b
    r = p @ a + a.T @ p - 2.0 * delta_bar * pb @ pb.T + np.eye(a.shape[0])
    return 0.5 * (r + r.T)


def observer_residual(p, a, c, delta_bar: float) -> Matrix:
    """``P A^T + A P - 2 delta P C^T C P + I``."""
    return riccati_residual(p, np.asarray(a).T, np.asarray(c).T, delta_bar)


def _bass_initial(a: Matrix, b: Matrix, gamma: float) -> Matrix | None:
    """Initial ``X0`` with ``a - gamma b b^T X0`` Hurwitz, or None.

    Shift so that ``a + beta I`` is anti-stable and solve one Lyapunov
    equation (Bass's method); the closed loop then decays at rate ``beta``.
    Needs a controllable pair to produce an invertible Gramian.
    """
    n = a.shape[0]
    beta = max(-eigenvalues(a).min_real, 0.0) + 1.0
    shifted = -(a + beta * np.eye(n))
    z = solve_lyapunov(shifted.T, 2.0 * b @ b.T)
    if np.linalg.cond(z) > 1e12:
        return None
    x0 = np.linalg.inv(z) / gamma
    x0 = 0.5 * (x0 + x0.T)
    if not is_hurwitz(a - gamma * b @ b.T @ x0):
        return None
    return x0


def _hamiltonian_solution(a: Matrix, b: Matrix, gamma: float, q: Matrix) -> Matrix:
    """Stabilizing solution from the stable invariant subspace of the Hamiltonian."""
    n = a.shape[0]
    ham = np.block([[a, -gamma * b @ b.T], [-q, -a.T]])
    t, u, sdim = scipy.linalg.schur(ham, output="real", sort="lhp")
    if sdim != n:
        raise RiccatiError(f"Hamiltonian has {sdim} stable eigenvalues, expected {n}")
    u11, u21 = u[:n, :n], u[n:, :n]
    x = np.linalg.solve(u11.T, u21.T).T
    return 0.5 * (x + x.T)


def solve_riccati(
    a,
    b,
    gamma: float,
    q,
    *,
    max_iter: int = 100,
    rtol: float = 1e-8,
    callback: Callable[[int, float], None] | None = None,
) -> Matrix:
    """Stabilizing solution of ``a^T X + X a - gamma X b b^T X + q = 0``.

    Newton-Kleinman from a shifted-Lyapunov initial gain; the Hamiltonian
    subspace solution seeds the iteration instead when the pair is only
    stabilizable. ``callback(iteration, residual_norm)`` is called after
    each step. Raises :class:`RiccatiError` when the final residual exceeds
    ``rtol * ||X||``.
    """
    a = as_square(a, "a")
    b = as_matrix(b, "b")
    q = as_square(q, "q")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if pbh_failures(a, b):
        raise AssumptionError("pair is not stabilizable")
    g = gamma * b @ b.T

    def resid(x):
        r = a.T @ x + x @ a - x @ g @ x + q
        return 0.5 * (r + r.T)

    x = _bass_initial(a, b, gamma)
    if x is None:
        x = _hamiltonian_solution(a, b, gamma, q)

    for it in range(1, max_iter + 1):
        closed = a - g @ x
        xgx = x @ g @ x
        try:
            x_new = solve_lyapunov(closed, q + 0.5 * (xgx + xgx.T))
        except ValueError as exc:
            raise RiccatiError(f"iteration {it} lost stability: {exc}") from exc
        change = np.linalg.norm(x_new - x)
        x = x_new
        if callback is not None:
            callback(it, float(np.linalg.norm(resid(x))))
        if not np.all(np.isfinite(x)):
            raise RiccatiError(f"iteration {it} produced non-finite values")
        if change <= 1e-13 * max(1.0, np.linalg.norm(x)):
            break

    res = np.linalg.norm(resid(x))
    if res > rtol * max(1.0, np.linalg.norm(x)):
        raise RiccatiError(f"residual {res:.3e} above tolerance after {it} iterations")
    x.setflags(write=False)
    return x


def synth_feedback(
    model: AgentModel,
    delta_bar: float,
    margin: float = DEFAULT_MARGIN,
    callback=None,
) -> tuple[Matrix, Matrix]:
    """Consensus gain ``K = B^T P`` for a worst-case coupling ``delta_bar``.

    ``P`` solves ``A^T P + P A - 2 delta P B B^T P + (1 + margin) I = 0``,
    so the Riccati inequality holds with slack ``margin * I``.
    """
    if delta_bar <= 0 or margin <= 0:
        raise ValueError("delta_bar and margin must be positive")
    bad = pbh_failures(model.a, model.b)
    if bad:
        raise AssumptionError(f"(A, B) is not stabilizable: PBH fails at {bad[0]:.6g}", bad[0])
    p = solve_riccati(model.a, model.b, 2.0 * delta_bar, (1.0 + margin) * np.eye(model.n), callback=callback)
    k = model.b.T @ p
    k.setflags(write=False)
    return p, k


def synth_observer(
    model: AgentModel,
    delta_bar: float,
    margin: float = DEFAULT_MARGIN,
    callback=None,
) -> tuple[Matrix, Matrix]:
    """Distributed observer gain ``K_o = P_o C^T`` (dual of :func:`synth_feedback`)."""
    if model.c is None:
        raise ValueError("observer synthesis needs an output matrix C")
    if delta_bar <= 0 or margin <= 0:
        raise ValueError("delta_bar and margin must be positive")
    bad = pbh_failures(model.a.T, model.c.T)
    if bad:
        raise AssumptionError(f"(A, C) is not detectable: PBH fails at {bad[0]:.6g}", bad[0])
    p = solve_riccati(model.a.T, model.c.T, 2.0 * delta_bar, (1.0 + margin) * np.eye(model.n), callback=callback)
    k_o = p @ model.c.T
    k_o.setflags(write=False)
    return p, k_o


def synth_stabilizer(model: AgentModel, decay: float = 0.0) -> Matrix:
    """Gain ``F`` placing the spectrum of ``A + B F`` left of ``-decay``.

    Uses ``F = -B^T X`` with ``X`` the stabilizing solution of the Riccati
    equation for ``A + decay I``.
    """
    if decay < 0:
        raise ValueError("decay must be nonnegative")
    bad = pbh_failures(model.a, model.b)
    if bad:
        raise AssumptionError(f"(A, B) is not stabilizable: PBH fails at {bad[0]:.6g}", bad[0])
    shifted = model.a + decay * np.eye(model.n)
    x = solve_riccati(shifted, model.b, 2.0, np.eye(model.n))
    f = -model.b.T @ x
    if not is_hurwitz(model.a + model.b @ f, decay):
        raise RiccatiError("stabilizer failed the post-hoc Hurwitz check")
    f.setflags(write=False)
    return f


@dataclass(frozen=True)
class GainSet:
    p: Matrix
    k: Matrix
    delta_bar: float
    margin: float
    p_o: Optional[Matrix] = None
    k_o: Optional[Matrix] = None
    f: Optional[Matrix] = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("p", "k", "p_o", "k_o", "f"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, as_matrix(val, name))

    @property
    def has_observer(self) -> bool:
        return self.k_o is not None and self.f is not None

    def certificates(self, model: AgentModel) -> dict:
        """Eigenvalues of the Riccati residuals and the ``A + B F`` abscissa."""
        out = {
            "feedback_residual_eigs": np.linalg.eigvalsh(
                riccati_residual(self.p, model.a, model.b, self.delta_bar)
            ).tolist(),
            "p_min_eig": float(np.linalg.eigvalsh(self.p).min()),
        }
        if self.p_o is not None:
            out["observer_residual_eigs"] = np.linalg.eigvalsh(
                observer_residual(self.p_o, model.a, model.c, self.delta_bar)
            ).tolist()
            out["p_o_min_eig"] = float(np.linalg.eigvalsh(self.p_o).min())
        if self.f is not None:
            out["a_plus_bf_abscissa"] = eigenvalues(model.a + model.b @ self.f).abscissa
        return out

    def to_dict(self) -> dict:
        d = {
            "delta_bar": self.delta_bar,
            "margin": self.margin,
            "P": np.asarray(self.p).tolist(),
            "K": np.asarray(self.k).tolist(),
        }
        for key, val in (("P_o", self.p_o), ("K_o", self.k_o), ("F", self.f)):
            if val is not None:
                d[key] = np.asarray(val).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GainSet":
        def opt(key):
            return as_matrix(d[key], key) if d.get(key) is not None else None

        return cls(
            p=as_matrix(d["P"], "P"),
            k=as_matrix(d["K"], "K"),
            delta_bar=float(d["delta_bar"]),
            margin=float(d.get("margin", DEFAULT_MARGIN)),
            p_o=opt("P_o"),
            k_o=opt("K_o"),
            f=opt("F"),
        )


def synthesize(
    model: AgentModel,
    delta_bar: float,
    margin: float = DEFAULT_MARGIN,
    decay: float = 0.0,
    observer: bool = False,
) -> GainSet:
    """Full gain set; with ``observer=True`` also ``P_o``, ``K_o`` and ``F``."""
    p, k = synth_feedback(model, delta_bar, margin)
    if not observer:
        return GainSet(p, k, float(delta_bar), float(margin))
    p_o, k_o = synth_observer(model, delta_bar, margin)
    f = synth_stabilizer(model, decay)
    return GainSet(p, k, float(delta_bar), float(margin), p_o, k_o, f)


def _alpha_equation(alpha: float, params: AveragingParams) -> float:
    """log(lhs) - log(rhs); strictly decreasing in ``alpha``."""
    kg, t = params.kappa_g, params.t_bound
    rhs = (-1.0 + math.sqrt(1.0 + params.nu / (params.kappa_v * kg * t))) / kg
    return kg * t / alpha + math.log(t / alpha) - math.log(rhs)


def solve_alpha_star(params: AveragingParams, rtol: float = 1e-10) -> float:
    """Unique positive root ``alpha`` of the switching-speed equation

        exp(kappa_g T / alpha) T / alpha
            = (-1 + sqrt(1 + nu / (kappa_v kappa_g T))) / kappa_g

    by bisection on a geometrically expanded bracket.
    """
    lo = hi = params.t_bound
    while _alpha_equation(hi, params) > 0:
        hi *= 2.0
    while _alpha_equation(lo, params) < 0:
        lo /= 2.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _alpha_equation(mid, params) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
