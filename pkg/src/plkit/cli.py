"""Command-line front end and the end-to-end analysis pipeline.

Exit codes: 0 success, 1 an analysis stage failed, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import (RunConfig, keys, make_config, parse_curve_spec, parse_point, parse_region,
                     to_jsonable)
from .errors import ConfigError, HypothesesNotMet, PLKitError
from .ergodic import capacity_fekete, capacity_green, entropy_lower_bound
from .invariants import analysis_grid, compute_kstar, nonescaping_set
from .io import load_curve, load_grid, overlay_curves, render_grid, save_curve, save_grid, write_ppm
from .periodic import find_periodic, koenigs_chart, verify_mainstep
from .pullback import iterate_pullback
from .trichotomy import B, C, certify_pl_restriction, classify

SCHEMA_VERSION = "plkit-report/1"
TIMING_KEY = "wall_times"

OK, ERROR, SKIPPED, GATED = "OK", "ERROR", "SKIPPED", "HYPOTHESES_NOT_MET"


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------

@dataclass
class AnalysisReport:
    config: dict
    stages: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    wall_times: dict = field(default_factory=dict)
    exit_code: int = 0

    def record(self, name, status, result=None, cause=None):
        entry = {"status": status}
        if cause is not None:
            entry["cause"] = cause
        if result is not None:
            entry["result"] = result
        self.stages[name] = entry
        if status == ERROR and self.exit_code == 0:
            self.exit_code = 1

    def status(self, name):
        return self.stages.get(name, {}).get("status")

    def to_json(self) -> dict:
        return to_jsonable({"schema_version": SCHEMA_VERSION, "plkit_version": __version__,
                            "config": self.config, "stages": self.stages,
                            "artifacts": dict(sorted(self.artifacts.items())),
                            "exit_code": self.exit_code, TIMING_KEY: self.wall_times})

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def without_timings(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != TIMING_KEY}


class _Stage:
    """Times a stage and turns library errors into a recorded ERROR."""

    def __init__(self, report: AnalysisReport, name: str):
        self.report, self.name = report, name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, typ, exc, tb):
        self.report.wall_times[self.name] = round(time.perf_counter() - self.t0, 6)
        if exc is None:
            return False
        if isinstance(exc, HypothesesNotMet):
            self.report.record(self.name, GATED, {"failed": list(getattr(exc, "failed", []))}, str(exc))
            return True
        if isinstance(exc, (PLKitError, ValueError, ArithmeticError)):
            self.report.record(self.name, ERROR, cause=f"{type(exc).__name__}: {exc}")
            return True
        return False


def _write_json(path: Path, obj):
    path.write_text(json.dumps(to_jsonable(obj), indent=1, sort_keys=True) + "\n")


def _save_curves(path: Path, curves):
    _write_json(path, [c.to_json() for c in curves])


def _map_summary(pm) -> dict:
    return {"map": pm.map.describe(), "degree": pm.degree, "mode": pm.mode,
            "critical_points": pm.critical_points, "postcritical_cells": pm.postcritical.count
            if pm.postcritical is not None else 0, "flags": dict(pm.flags)}


def _repelling_root(pm) -> complex:
    """The repelling fixed point of largest multiplier inside the domain."""
    fixed = find_periodic(pm, 1)
    rep = [o for o in fixed if o.repelling and pm.in_domain(o.points[0])]
    if not rep:
        raise PLKitError("no repelling fixed point to root the backward tree")
    return max(rep, key=lambda o: (abs(o.multiplier), o.points[0].real)).points[0]


def _write_orbits_csv(path: Path, orbits):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["period", "re", "im", "|λ|", "kind"])
        for o in orbits:
            for p in o.points:
                w.writerow([o.period, repr(p.real), repr(p.imag), repr(abs(o.multiplier)), o.kind.value])


def run_full_analysis(config: RunConfig) -> AnalysisReport:
    """map → classify → (B: certify, K, K*, mainstep, entropy, capacity).

    Every stage is recorded; stages downstream of a failure are SKIPPED
    with the cause, and the report is written regardless.
    """
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rep = AnalysisReport(config.echo())
    art = rep.artifacts

    pm = None
    with _Stage(rep, "map"):
        pm = config.proper_map()
        rep.record("map", OK, _map_summary(pm))
    if rep.status("map") != OK:
        rep.exit_code = 2 if "ConfigError" in rep.stages["map"].get("cause", "") else 1
        for s in ("classify", "certify", "julia", "kstar", "mainstep", "entropy", "capacity"):
            rep.record(s, SKIPPED, cause="map stage failed")
        return _finish(rep, out)

    verdict = None
    with _Stage(rep, "classify"):
        g0 = config.gamma0_curve(pm)
        save_curve(out / "gamma0.json", g0)
        art["gamma0"] = "gamma0.json"
        verdict = classify(pm, g0, config.n_max, certify=False)
        for lv, level in enumerate(verdict.levels, start=1):
            comps = level.components if hasattr(level, "components") else list(level)
            name = f"gamma_{lv:02d}.json"
            _save_curves(out / name, comps)
            art[f"gamma_{lv:02d}"] = name
        res = {"verdict": verdict.verdict, "witness_n": verdict.witness_n}
        if verdict.verdict == C:
            ev = verdict.evidence
            res["attracting_point"] = ev.a
            res["multiplier"] = ev.multiplier
        elif verdict.verdict != B:
            res["evidence"] = verdict.to_json()["evidence"]
        rep.record("classify", OK, res)

    downstream = ("certify", "julia", "kstar", "mainstep", "entropy", "capacity")
    if rep.status("classify") != OK:
        for s in downstream:
            rep.record(s, SKIPPED, cause="classify stage failed")
        return _finish(rep, out)
    if verdict.verdict != B:
        for s in downstream:
            rep.record(s, SKIPPED, cause=f"verdict {verdict.verdict}: no polynomial-like restriction")
        return _finish(rep, out)

    cert = None
    with _Stage(rep, "certify"):
        cert = certify_pl_restriction(pm, verdict, resolution=config.resolution)
        save_curve(out / "certificate_outer.json", cert.outer)
        _save_curves(out / "certificate_inner.json", cert.inner_components)
        art["certificate_outer"] = "certificate_outer.json"
        art["certificate_inner"] = "certificate_inner.json"
        rep.record("certify", OK, cert.to_json())

    kset = None
    with _Stage(rep, "julia"):
        kset = nonescaping_set(pm, resolution=config.resolution, horizon=config.escape_horizon,
                               n_samples=config.n_samples)
        save_grid(out / "k.json", kset.K)
        write_ppm(out / "k.ppm", render_grid(kset.K))
        art["k_grid"], art["k_render"] = "k.json", "k.ppm"
        rep.record("julia", OK, kset.to_json())

    if cert is None:
        rep.record("kstar", SKIPPED, cause="certify stage failed")
    else:
        with _Stage(rep, "kstar"):
            grid = kset.K.like(np.zeros_like(kset.K.cells)) if kset is not None else None
            ks = compute_kstar(pm, cert, k_max=config.k_max, resolution=config.resolution, grid=grid,
                               return_info=True)
            save_grid(out / "kstar.json", ks.grid)
            img = overlay_curves(render_grid(ks.grid), ks.grid, [cert.outer])
            write_ppm(out / "kstar.ppm", img)
            art["kstar_grid"], art["kstar_render"] = "kstar.json", "kstar.ppm"
            res = {"levels": ks.levels, "converged": ks.converged, "cells": ks.grid.count,
                   "area": ks.grid.area, "changes_cells": list(ks.changes)}
            rep.record("kstar", OK, res)

    if kset is None:
        for s in ("mainstep", "entropy", "capacity"):
            rep.record(s, SKIPPED, cause="julia stage failed")
        return _finish(rep, out)

    with _Stage(rep, "mainstep"):
        ms = verify_mainstep(pm, kset, p_max=config.p_max)
        orbits = [o for p in range(1, min(config.p_max, 4) + 1) for o in find_periodic(pm, p)]
        _write_orbits_csv(out / "orbits.csv", orbits)
        art["orbits"] = "orbits.csv"
        rep.record("mainstep", OK, ms.to_json())

    with _Stage(rep, "entropy"):
        x0 = _repelling_root(pm)
        X = kset.K.boundary()
        est = entropy_lower_bound(pm, X, config.entropy_delta, config.entropy_k, x0)
        res = est.to_json()
        res["root"] = x0
        res["separated_growth_bound"] = 2 ** (0.85 * est.k) if est.k else 1
        rep.record("entropy", OK, res)

    with _Stage(rep, "capacity"):
        res = {"fekete": capacity_fekete(kset.K, config.capacity_points).to_json()}
        if pm.map.is_polynomial:
            res["green_escape"] = capacity_green(pm).to_json()
        rep.record("capacity", OK, res)

    return _finish(rep, out)


def _finish(rep: AnalysisReport, out: Path) -> AnalysisReport:
    for name in rep.artifacts.values():
        assert (out / name).exists(), name
    (out / "report.json").write_text(rep.dumps())
    return rep


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="flat key=value config file")
    g = p.add_argument_group("config keys (override the file)")
    for k in keys():
        if k in ("out",):
            continue
        g.add_argument("--" + k.replace("_", "-"), dest="cfg_" + k, default=None, metavar="V")
    return p


def build_parser() -> argparse.ArgumentParser:
    parent = _config_parent()
    ap = argparse.ArgumentParser(prog="plkit", description="Polynomial-like restriction toolkit.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_):
        s = sub.add_parser(name, parents=[parent], help=help_)
        return s

    s = add("run", "full pipeline with report and artifacts")
    s.add_argument("--out", help="output directory")

    s = add("classify", "trichotomy verdict for a curve")
    s.add_argument("-n", dest="cfg_n_max")
    s.add_argument("--report")
    s.add_argument("--out", help="directory for the level curves")

    s = add("certify", "build and check a polynomial-like restriction")
    s.add_argument("-n", dest="cfg_n_max")
    s.add_argument("--report")
    s.add_argument("--out")

    s = add("pullback", "write successive preimage curves")
    s.add_argument("--curve", required=True)
    s.add_argument("-n", type=int, default=5)
    s.add_argument("--out", required=True)

    s = add("julia", "filled Julia set raster")
    s.add_argument("--res", dest="cfg_resolution")
    s.add_argument("--out", help="PPM render")
    s.add_argument("--grid", help="GridSet JSON output")
    s.add_argument("--report")

    s = add("kstar", "nested-pullback approximation of K")
    s.add_argument("--res", dest="cfg_resolution")
    s.add_argument("--out", help="PPM render")
    s.add_argument("--grid")
    s.add_argument("--report")

    s = add("periodic", "periodic orbits of one period")
    s.add_argument("-p", type=int, required=True)
    s.add_argument("--region")
    s.add_argument("--csv")
    s.add_argument("--report")

    s = add("mainstep", "repelling periodic points versus K")
    s.add_argument("-p", dest="cfg_p_max")
    s.add_argument("--res", dest="cfg_resolution")
    s.add_argument("--report")

    s = add("koenigs", "linearizing chart at a repelling fixed point")
    s.add_argument("--point", required=True, help="re,im")
    s.add_argument("--radius", type=float, default=0.2)
    s.add_argument("--report")

    s = add("entropy", "separated backward tree growth rate")
    s.add_argument("--delta", dest="cfg_entropy_delta")
    s.add_argument("-k", dest="cfg_entropy_k")
    s.add_argument("--grid", help="set X as GridSet JSON (default: boundary of K)")
    s.add_argument("--x0", help="root point re,im (default: a repelling fixed point)")
    s.add_argument("--report")

    s = add("capacity", "logarithmic capacity of a grid set")
    s.add_argument("--grid", help="GridSet JSON (default: K of --map)")
    s.add_argument("--method", choices=["fekete", "green"], default="fekete")
    s.add_argument("-n", type=int, default=None, help="Fekete points")
    s.add_argument("--report")
    return ap


def _config_from_args(args, need_map: bool = True) -> RunConfig:
    over = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    if args.command == "run" and getattr(args, "out", None):
        over["out"] = args.out
    if not need_map and "map" not in over:
        over["map"] = "z^2"          # placeholder; the command does not use it
    return make_config(args.config, over)


def _emit(obj, path):
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_classify(args, cfg):
    pm = cfg.proper_map()
    g0 = cfg.gamma0_curve(pm)
    v = classify(pm, g0, cfg.n_max, certify=args.command == "certify")
    rep = v.to_json()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        files = []
        for lv, level in enumerate(v.levels, start=1):
            name = f"gamma_{lv:02d}.json"
            _save_curves(out / name, level.components if hasattr(level, "components") else level)
            files.append(str(out / name))
        rep["curves"] = files
    if args.command == "certify":
        if v.verdict != B:
            rep["certified"] = False
            _emit(rep, args.report)
            return 1
        rep["certified"] = True
    _emit(rep, args.report)
    return 0


def _cmd_pullback(args, cfg):
    pm = cfg.proper_map()
    g0 = load_curve(args.curve) if Path(args.curve).is_file() else parse_curve_spec(args.curve, pm)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    levels = iterate_pullback(pm, g0, args.n)
    curves = [g0]
    for r in levels:
        _save_curves(out / f"gamma_{r.level:02d}.json", r.components)
        curves += r.components
    grid = analysis_grid(pm, min(cfg.resolution, 1024))
    img = overlay_curves(render_grid(grid), grid, curves)
    write_ppm(out / "pullback.ppm", img)
    _emit({"levels": [{"level": r.level, "local_degrees": r.local_degrees, "residual": r.residual,
                       "perturbed": r.perturbed} for r in levels]}, None)
    return 0


def _cmd_julia(args, cfg):
    pm = cfg.proper_map()
    rep = nonescaping_set(pm, resolution=cfg.resolution, horizon=cfg.escape_horizon, n_samples=cfg.n_samples)
    if args.out:
        write_ppm(args.out, render_grid(rep.K))
    if args.grid:
        save_grid(args.grid, rep.K)
    _emit(rep.to_json(), args.report)
    return 0


def _cmd_kstar(args, cfg):
    pm = cfg.proper_map()
    v = classify(pm, cfg.gamma0_curve(pm), cfg.n_max)
    if v.verdict != B:
        _emit({"verdict": v.verdict, "kstar": None}, args.report)
        return 1
    ks = compute_kstar(pm, v.evidence, k_max=cfg.k_max, resolution=cfg.resolution, return_info=True)
    if args.out:
        write_ppm(args.out, overlay_curves(render_grid(ks.grid), ks.grid, [v.evidence.outer]))
    if args.grid:
        save_grid(args.grid, ks.grid)
    _emit({"levels": ks.levels, "converged": ks.converged, "cells": ks.grid.count, "area": ks.grid.area,
           "changes_cells": list(ks.changes)}, args.report)
    return 0


def _cmd_periodic(args, cfg):
    pm = cfg.proper_map()
    orbits = find_periodic(pm, args.p, parse_region(args.region, pm))
    if args.csv:
        _write_orbits_csv(Path(args.csv), orbits)
    _emit({"period": args.p, "orbits": [o.to_json() for o in orbits]}, args.report)
    return 0


def _cmd_mainstep(args, cfg):
    pm = cfg.proper_map()
    K = nonescaping_set(pm, resolution=cfg.resolution, horizon=cfg.escape_horizon, n_samples=cfg.n_samples)
    try:
        ms = verify_mainstep(pm, K, p_max=cfg.p_max)
    except HypothesesNotMet as e:
        _emit({"status": GATED, "failed": list(e.failed)}, args.report)
        return 0
    _emit(ms.to_json(), args.report)
    return 0 if ms.passed else 1


def _cmd_koenigs(args, cfg):
    pm = cfg.proper_map()
    chart = koenigs_chart(pm, parse_point(args.point), radius=args.radius, tol=cfg.tol.koe_tol)
    rep = chart.to_json()
    rep["functional_residual"] = chart.functional_residual()
    _emit(rep, args.report)
    return 0


def _cmd_entropy(args, cfg):
    pm = cfg.proper_map()
    if args.grid:
        X = load_grid(args.grid)
    else:
        X = nonescaping_set(pm, resolution=cfg.resolution, horizon=cfg.escape_horizon,
                            n_samples=cfg.n_samples).K.boundary()
    x0 = parse_point(args.x0) if args.x0 else _repelling_root(pm)
    est = entropy_lower_bound(pm, X, cfg.entropy_delta, cfg.entropy_k, x0)
    _emit(est.to_json(), args.report)
    return 0


def _cmd_capacity(args, cfg):
    n = args.n or cfg.capacity_points
    if args.method == "green":
        est = capacity_green(cfg.proper_map())
    else:
        X = load_grid(args.grid) if args.grid else nonescaping_set(
            cfg.proper_map(), resolution=cfg.resolution, horizon=cfg.escape_horizon).K
        est = capacity_fekete(X, n)
    _emit(est.to_json(), args.report)
    return 0


_COMMANDS = {"classify": _cmd_classify, "certify": _cmd_classify, "pullback": _cmd_pullback,
             "julia": _cmd_julia, "kstar": _cmd_kstar, "periodic": _cmd_periodic,
             "mainstep": _cmd_mainstep, "koenigs": _cmd_koenigs, "entropy": _cmd_entropy,
             "capacity": _cmd_capacity}


def main(argv=None) -> int:
    # numba's notice that it fell back from TBB to another threading layer
    warnings.filterwarnings("ignore", message="The TBB threading layer")
    args = build_parser().parse_args(argv)
    need_map = not (args.command == "capacity" and args.grid and args.method == "fekete")
    try:
        cfg = _config_from_args(args, need_map)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        if args.command == "run":
            out = Path(getattr(args, "out", None) or "plkit-out")
            out.mkdir(parents=True, exist_ok=True)
            rep = AnalysisReport({"error": str(e)}, exit_code=2)
            rep.record("config", ERROR, cause=f"ConfigError: {e}")
            rep.exit_code = 2
            (out / "report.json").write_text(rep.dumps())
        return 2
    if args.command == "run":
        rep = run_full_analysis(cfg)
        print(json.dumps({k: v["status"] for k, v in rep.stages.items()}))
        return rep.exit_code
    try:
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except PLKitError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
