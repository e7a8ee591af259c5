"""Scenario files: JSON documents bundling model, graphs, schedule and run settings.

Matrices are row-major nested lists. A minimal scenario::

    {
      "schema_version": 1,
      "name": "demo",
      "model": {"A": [[0.0]], "B": [[1.0]]},
      "schedule": {
        "graphs": [{"n_followers": 1, "edges": [], "leader_links": [[1]]}],
        "intervals": [{"segments": [[0, 1.0]]}],
        "periodic": true
      }
    }

Everything else has defaults; see :class:`Scenario`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .gainsynth import DEFAULT_MARGIN, AgentModel, AveragingParams
from .graphtop import LeaderGraph
from .netsim import MODES, InitialCondition
from .switchsched import SwitchingSchedule

__all__ = [
    "SCHEMA_VERSION",
    "ScenarioError",
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "demo_model",
    "demo_graphs",
    "demo_scenario",
]

SCHEMA_VERSION = 1

# agent matrices of the four-follower numerical example
DEMO_A = [
    [0.5548, -0.5397, -0.0757],
    [0.3279, -0.0678, -0.4495],
    [-0.0956, -0.6640, 0.0130],
]
DEMO_B = [[3.0, 5.0], [3.0, -2.0], [-8.0, -8.0]]
DEMO_C = [[1.0, -1.0, 2.0], [-4.0, 2.0, -3.0]]


class ScenarioError(ValueError):
    """Malformed scenario; ``where`` names the offending field or line."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass(frozen=True)
class Scenario:
    name: str
    model: AgentModel
    schedule: SwitchingSchedule
    delta_bar: Optional[float] = None
    delta_safety: float = 3.0
    delta_strategy: Any = ("grid", 0.05)
    margin: float = DEFAULT_MARGIN
    decay: float = 0.0
    mode: str = "state_feedback"
    t_max: Optional[float] = None
    tau_min: Optional[float] = None
    step: float = 1e-3
    horizon: float = 30.0
    threshold: float = 1e-3
    initial: Optional[InitialCondition] = None
    seed: int = 0
    init_scale: float = 1.0
    averaging: Optional[AveragingParams] = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def graphs(self) -> tuple[LeaderGraph, ...]:
        return self.schedule.graphs

    @property
    def n_followers(self) -> int:
        return self.schedule.n_followers

    @property
    def validation_bounds(self) -> tuple[float, float]:
        """``(T_max, tau_min)``, defaulting to what the schedule itself uses."""
        ivs = self.schedule.intervals
        t_max = self.t_max if self.t_max is not None else max(iv.length for iv in ivs)
        tau = self.tau_min if self.tau_min is not None else min(min(iv.dwells) for iv in ivs)
        return t_max, tau

    def initial_condition(self, seed: int | None = None) -> InitialCondition:
        """Explicit initial states, or seeded random ones."""
        if self.initial is not None and seed is None:
            return self.initial
        rng = np.random.default_rng(self.seed if seed is None else seed)
        return InitialCondition.random(
            rng, self.model.n, self.n_followers, self.init_scale, observer=self.mode == "observer"
        )

    def with_overrides(self, **kw) -> "Scenario":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        model = {"A": self.model.a.tolist(), "B": self.model.b.tolist()}
        if self.model.c is not None:
            model["C"] = self.model.c.tolist()
        sim: dict = {"step": self.step, "horizon": self.horizon, "threshold": self.threshold}
        if self.initial is not None:
            init = {"x0": self.initial.x0.tolist(), "x": self.initial.x.tolist()}
            if self.initial.eps_hat is not None:
                init["eps_hat"] = self.initial.eps_hat.tolist()
            sim["initial"] = init
        else:
            sim["initial"] = {"random": {"seed": self.seed, "scale": self.init_scale}}
        out = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "model": model,
            "schedule": self.schedule.to_dict(),
            "validation": {"t_max": self.t_max, "tau_min": self.tau_min},
            "synthesis": {
                "delta_bar": self.delta_bar,
                "delta_safety": self.delta_safety,
                "delta_strategy": list(self.delta_strategy)
                if not isinstance(self.delta_strategy, str) else self.delta_strategy,
                "margin": self.margin,
                "decay": self.decay,
                "mode": self.mode,
            },
            "simulation": sim,
        }
        if self.averaging is not None:
            a = self.averaging
            out["averaging"] = {"t_bound": a.t_bound, "kappa_g": a.kappa_g,
                                "kappa_v": a.kappa_v, "nu": a.nu}
        return out

    def dump(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path


def _get(obj: dict, key: str, where: str, default=..., kind=None):
    if not isinstance(obj, dict):
        raise ScenarioError(where, "expected an object")
    if key not in obj or obj[key] is None:
        if default is ...:
            raise ScenarioError(f"{where}.{key}", "missing required field")
        return default
    val = obj[key]
    if kind is not None:
        try:
            val = kind(val)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"{where}.{key}", str(exc)) from None
    return val


def parse_scenario(doc: dict, name: str = "scenario") -> Scenario:
    """Build a :class:`Scenario` from a decoded JSON document."""
    if not isinstance(doc, dict):
        raise ScenarioError("$", "scenario must be a JSON object")
    version = _get(doc, "schema_version", "$", SCHEMA_VERSION, int)
    if version != SCHEMA_VERSION:
        raise ScenarioError("$.schema_version", f"unsupported version {version}")

    m = _get(doc, "model", "$")
    try:
        model = AgentModel(
            np.array(_get(m, "A", "$.model"), dtype=float),
            np.array(_get(m, "B", "$.model"), dtype=float),
            None if m.get("C") is None else np.array(m["C"], dtype=float),
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError("$.model", str(exc)) from None

    sched = _get(doc, "schedule", "$")
    graph_docs = sched.get("graphs", doc.get("graphs")) if isinstance(sched, dict) else None
    if graph_docs is None:
        raise ScenarioError("$.schedule.graphs", "missing required field")
    graphs = []
    for i, g in enumerate(graph_docs):
        try:
            graphs.append(LeaderGraph.from_dict(g))
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"$.schedule.graphs[{i}]", str(exc)) from None
    try:
        schedule = SwitchingSchedule.from_dict(sched, graphs)
    except KeyError as exc:
        raise ScenarioError("$.schedule", f"missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ScenarioError("$.schedule", str(exc)) from None

    val = doc.get("validation") or {}
    syn = doc.get("synthesis") or {}
    sim = doc.get("simulation") or {}
    mode = _get(syn, "mode", "$.synthesis", "state_feedback", str)
    if mode not in MODES:
        raise ScenarioError("$.synthesis.mode", f"expected one of {MODES}, got {mode!r}")
    strategy = syn.get("delta_strategy", ("grid", 0.05))
    if not isinstance(strategy, str):
        strategy = tuple(strategy)

    initial = None
    seed, scale = 0, 1.0
    init_doc = sim.get("initial") or {"random": {}}
    if "random" in init_doc:
        rnd = init_doc["random"] or {}
        seed = _get(rnd, "seed", "$.simulation.initial.random", 0, int)
        scale = _get(rnd, "scale", "$.simulation.initial.random", 1.0, float)
    else:
        try:
            initial = InitialCondition(init_doc["x0"], init_doc["x"], init_doc.get("eps_hat"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError("$.simulation.initial", str(exc)) from None
        if initial.x0.size != model.n or initial.x.shape != (schedule.n_followers, model.n):
            raise ScenarioError("$.simulation.initial", "initial state dimensions do not match n and N")

    averaging = None
    if doc.get("averaging"):
        av = doc["averaging"]
        try:
            averaging = AveragingParams(
                _get(av, "t_bound", "$.averaging", kind=float),
                _get(av, "kappa_g", "$.averaging", 1.0, float),
                _get(av, "kappa_v", "$.averaging", 1.0, float),
                _get(av, "nu", "$.averaging", 1.0, float),
            )
        except ScenarioError:
            raise
        except ValueError as exc:
            raise ScenarioError("$.averaging", str(exc)) from None

    return Scenario(
        name=_get(doc, "name", "$", name, str),
        model=model,
        schedule=schedule,
        delta_bar=_get(syn, "delta_bar", "$.synthesis", None, float),
        delta_safety=_get(syn, "delta_safety", "$.synthesis", 3.0, float),
        delta_strategy=strategy,
        margin=_get(syn, "margin", "$.synthesis", DEFAULT_MARGIN, float),
        decay=_get(syn, "decay", "$.synthesis", 0.0, float),
        mode=mode,
        t_max=_get(val, "t_max", "$.validation", None, float),
        tau_min=_get(val, "tau_min", "$.validation", None, float),
        step=_get(sim, "step", "$.simulation", 1e-3, float),
        horizon=_get(sim, "horizon", "$.simulation", 30.0, float),
        threshold=_get(sim, "threshold", "$.simulation", 1e-3, float),
        initial=initial,
        seed=seed,
        init_scale=scale,
        averaging=averaging,
        raw=doc,
    )


def load_scenario(path) -> Scenario:
    """Read and parse a scenario file, reporting JSON errors with line numbers."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(str(path), exc.strerror or str(exc)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    return parse_scenario(doc, name=path.stem)


def demo_model(with_output: bool = True) -> AgentModel:
    """Three-state, two-input demo agent; open-loop eigenvalues 0.5 ± 0.3j and -0.5."""
    return AgentModel(np.array(DEMO_A), np.array(DEMO_B), np.array(DEMO_C) if with_output else None)


def demo_graphs() -> list[LeaderGraph]:
    """Six stand-in topologies on four followers.

    Graphs 1-3 and 4-6 are each jointly connected (paths 0-1-2-3-4 and
    0-3-4-1-2) while every single graph leaves followers unreachable.
    """
    g = LeaderGraph.from_lists
    return [
        g(4, [(1, 2)], [1]),
        g(4, [(2, 3)]),
        g(4, [(3, 4)]),
        g(4, [(3, 4)], [3]),
        g(4, [(4, 1)]),
        g(4, [(1, 2)]),
    ]


def demo_scenario(mode: str = "state_feedback") -> Scenario:
    """The shipped demo: demo agent, six graphs, 0.5 s dwell, triples per interval."""
    with resources.files("leadfollow").joinpath("data/demo_scenario.json").open() as fh:
        sc = parse_scenario(json.load(fh), name="demo")
    return replace(sc, mode=mode)
