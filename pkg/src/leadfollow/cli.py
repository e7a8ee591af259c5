"""Command-line front end.

Exit codes: 0 success, 1 domain failure (assumption or validation),
2 input error (unreadable or malformed files, bad arguments).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import graphtop, netsim, switchsched
from .gainsynth import (
    AssumptionError,
    GainSet,
    RiccatiError,
    check_detectable,
    pbh_failures,
    solve_alpha_star,
    synthesize,
)
from .matrixkit import eigenvalues
from .scenario import Scenario, ScenarioError, load_scenario

EXIT_OK, EXIT_DOMAIN, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _fmt_c(z: complex) -> str:
    if abs(z.imag) < 1e-12:
        return f"{z.real:.6g}"
    return f"{z.real:.6g}{z.imag:+.6g}j"


def _dump_json(obj, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _load(args) -> Scenario:
    sc = load_scenario(args.scenario)
    return sc.with_overrides(
        mode=getattr(args, "mode", None),
        margin=getattr(args, "margin", None),
        delta_bar=getattr(args, "delta_bar", None),
        step=getattr(args, "step", None),
        horizon=getattr(args, "horizon", None),
    )


def _load_gains(path) -> GainSet:
    try:
        doc = json.loads(Path(path).read_text())
        return GainSet.from_dict(doc)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: bad gain file ({exc})") from None


def _validation(sc: Scenario) -> switchsched.ValidationReport:
    t_max, tau = sc.validation_bounds
    return switchsched.validate(sc.schedule, t_max, tau)


def _delta_for(sc: Scenario) -> tuple[float, switchsched.DeltaEstimate]:
    """Synthesis parameter: explicit override, else estimate / safety factor."""
    _, tau = sc.validation_bounds
    est = switchsched.estimate_delta_bar(sc.schedule, sc.delta_strategy, tau)
    if sc.delta_bar is not None:
        return sc.delta_bar, est
    return est.value / sc.delta_safety, est


def cmd_validate(args) -> int:
    sc = _load(args)
    report = _validation(sc)
    print(report)
    return EXIT_OK if report.passed else EXIT_DOMAIN


def run_synth(sc: Scenario, force: bool = False) -> dict:
    """Synthesize gains for a scenario; returns the gain-file document."""
    report = _validation(sc)
    if not report.passed and not force:
        raise AssumptionError("schedule fails joint connectivity (Assumption 2):\n" + str(report))
    delta, est = _delta_for(sc)
    if not delta > 0:
        raise AssumptionError(f"delta_bar estimate is not positive ({est.value:.6g})")
    observer = sc.mode == "observer"
    if observer:
        if sc.model.c is None:
            raise AssumptionError("observer mode needs C (Assumption 3: (A, C) detectable)")
        if not check_detectable(sc.model):
            lam = pbh_failures(sc.model.a.T, sc.model.c.T)[0]
            raise AssumptionError(
                f"Assumption 3 fails: (A, C) is not detectable, PBH rank drops at eigenvalue {_fmt_c(lam)}"
            )
    try:
        gains = synthesize(sc.model, delta, sc.margin, sc.decay, observer=observer)
    except AssumptionError as exc:
        lam = exc.eigenvalue
        where = f" at eigenvalue {_fmt_c(lam)}" if lam is not None else ""
        raise AssumptionError(f"Assumption 1 fails: (A, B) is not stabilizable{where}") from None
    doc = gains.to_dict()
    doc["mode"] = sc.mode
    doc["scenario"] = sc.name
    doc["certificates"] = gains.certificates(sc.model)
    doc["delta_estimate"] = {
        "value": est.value,
        "samples": est.samples,
        "per_interval_min": list(est.per_interval_min),
        "strategy": est.strategy if isinstance(est.strategy, str) else list(est.strategy),
        "sample_based": True,
        "used_override": sc.delta_bar is not None,
    }
    doc["validation_passed"] = report.passed
    return doc


def cmd_synth(args) -> int:
    sc = _load(args)
    doc = run_synth(sc, force=args.force)
    out = Path(args.out)
    _dump_json(doc, out)
    print(f"delta_bar used: {doc['delta_bar']:.6g} (estimate {doc['delta_estimate']['value']:.6g})")
    print("K =", np.array2string(np.array(doc["K"]), precision=6))
    cert = doc["certificates"]
    print(f"max eig of Riccati residual: {max(cert['feedback_residual_eigs']):.6g}")
    if "K_o" in doc:
        print("K_o =", np.array2string(np.array(doc["K_o"]), precision=6))
        print("F =", np.array2string(np.array(doc["F"]), precision=6))
        print(f"max eig of observer residual: {max(cert['observer_residual_eigs']):.6g}")
    print(f"wrote {out}")
    return EXIT_OK


def run_simulate(sc: Scenario, gains: GainSet, out_dir: Path, seed=None, plot_data=False,
                 stride: int = 1) -> dict:
    if gains.k.shape != (sc.model.m, sc.model.n):
        raise InputError(f"gain K has shape {gains.k.shape}, model needs {(sc.model.m, sc.model.n)}")
    if sc.mode == "observer" and not gains.has_observer:
        raise InputError("observer mode needs a gain file with K_o and F")
    report = _validation(sc)
    init = sc.initial_condition(seed)
    log = netsim.simulate(sc.model, gains, sc.schedule, init, sc.step, sc.horizon, sc.mode)
    summary = netsim.summarize(log, sc.model, gains, sc.schedule, sc.threshold)
    summary["scenario"] = sc.name
    summary["validation_passed"] = report.passed
    summary["seed"] = None if (sc.initial is not None and seed is None) else (sc.seed if seed is None else seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    netsim.write_trajectory_csv(log, out_dir / "trajectory.csv", stride)
    if plot_data:
        netsim.write_error_norms_csv(log, out_dir / "error_norms.csv", stride)
    _dump_json(summary, out_dir / "summary.json")
    return summary


def cmd_simulate(args) -> int:
    sc = _load(args)
    gains = _load_gains(args.gains)
    summary = run_simulate(sc, gains, Path(args.out), args.seed, args.plot_data, args.stride)
    print(f"terminal consensus error: {summary['terminal_consensus_error']:.6g} "
          f"(initial {summary['initial_consensus_error']:.6g}, ratio {summary['error_ratio']:.3g})")
    if "terminal_observer_error" in summary:
        print(f"terminal observer error: {summary['terminal_observer_error']:.6g}")
    if summary["diverged"]:
        print("DIVERGED: consensus error grew")
    elif summary["converged"]:
        print("converged below threshold")
    print(f"wrote {args.out}")
    return EXIT_OK


def analyze(sc: Scenario, gains: GainSet | None = None) -> dict:
    _, tau = sc.validation_bounds
    s = sc.schedule
    est = switchsched.estimate_delta_bar(s, sc.delta_strategy, tau)
    intervals = []
    for k in range(len(s.intervals)):
        hbar = switchsched.averaged_structure(s, k)
        entry = {
            "index": k,
            "hbar_spectrum": [complex(z) for z in eigenvalues(hbar)],
            "gershgorin": [(d.center.real, d.radius) for d in graphtop.gershgorin_discs(hbar)],
            "min_real": graphtop.min_real_eig(hbar),
        }
        if gains is not None:
            entry["abar_abscissa"] = eigenvalues(
                netsim.averaged_system_matrix(sc.model, gains.k, s, k)
            ).abscissa
        intervals.append(entry)
    out = {"delta_estimate": est, "intervals": intervals}
    if sc.averaging is not None:
        out["alpha_star"] = solve_alpha_star(sc.averaging)
    return out


def cmd_analyze(args) -> int:
    sc = _load(args)
    gains = _load_gains(args.gains) if args.gains else None
    res = analyze(sc, gains)
    for e in res["intervals"]:
        print(f"interval {e['index']}:")
        print("  Hbar spectrum:", ", ".join(_fmt_c(z) for z in e["hbar_spectrum"]))
        print(f"  Re lambda_min(Hbar) = {e['min_real']:.6g}")
        print("  Gershgorin discs (center, radius):",
              ", ".join(f"({c:.4g}, {r:.4g})" for c, r in e["gershgorin"]))
        if "abar_abscissa" in e:
            tag = "Hurwitz" if e["abar_abscissa"] < 0 else "NOT Hurwitz"
            print(f"  averaged closed-loop abscissa = {e['abar_abscissa']:.6g} ({tag})")
    est = res["delta_estimate"]
    flag = "ok" if est.ok else "FAILURE: nonpositive, joint connectivity insufficient"
    print(f"delta_bar estimate (sample-based, {est.samples} samples): {est.value:.6g} [{flag}]")
    if "alpha_star" in res:
        print(f"alpha* = {res['alpha_star']:.6g}")
    ok = est.ok and all(e.get("abar_abscissa", -1.0) < 0 for e in res["intervals"])
    return EXIT_OK if ok else EXIT_DOMAIN


def _sweep_one(path: str, out_root: str, seed) -> tuple[str, dict]:
    sc = load_scenario(path)
    doc = run_synth(sc)
    out_dir = Path(out_root) / sc.name
    _dump_json(doc, out_dir / "gains.json")
    summary = run_simulate(sc, GainSet.from_dict(doc), out_dir, seed)
    return sc.name, summary


def cmd_sweep(args) -> int:
    paths = [str(p) for p in args.scenario]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as ex:
            futures = [ex.submit(_sweep_one, p, args.out, args.seed) for p in paths]
            results = [f.result() for f in futures]
    else:
        results = [_sweep_one(p, args.out, args.seed) for p in paths]
    results.sort(key=lambda r: r[0])
    table = {name: s for name, s in results}
    _dump_json(table, Path(args.out) / "sweep_summary.json")
    for name, s in results:
        status = "converged" if s["converged"] else ("diverged" if s["diverged"] else "not converged")
        print(f"{name}: terminal error {s['terminal_consensus_error']:.3g} ({status})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="leadfollow",
        description="Leader-following consensus under switching topologies: "
        "validate schedules, synthesize gains, simulate, analyze.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, gains=False):
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        if gains:
            sp.add_argument("--gains", required=True, help="gain file written by 'synth'")
        sp.add_argument("--mode", choices=netsim.MODES, help="override the scenario's mode")

    v = sub.add_parser("validate", help="check joint connectivity and dwell bounds")
    common(v)
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("synth", help="synthesize K (and K_o, F) with certificates")
    common(s)
    s.add_argument("--out", required=True, help="gain file to write")
    s.add_argument("--margin", type=float)
    s.add_argument("--delta-bar", type=float)
    s.add_argument("--force", action="store_true", help="synthesize even if validation fails")
    s.set_defaults(func=cmd_synth)

    r = sub.add_parser("simulate", help="simulate the closed loop, write CSV and summary")
    common(r, gains=True)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--step", type=float)
    r.add_argument("--horizon", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--stride", type=int, default=1, help="write every n-th sample to CSV")
    r.add_argument("--plot-data", action="store_true", help="also write per-agent error norms")
    r.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="averaged spectra, delta_bar estimate, alpha*")
    a.add_argument("--scenario", required=True)
    a.add_argument("--gains")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("sweep", help="synth + simulate several scenarios")
    w.add_argument("--scenario", nargs="+", required=True)
    w.add_argument("--out", required=True)
    w.add_argument("--seed", type=int)
    w.add_argument("--workers", type=int, default=1)
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ScenarioError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (AssumptionError, RiccatiError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except netsim.SimulationOverflow as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
