"""Batch driver: ``thincarpet <task> --config cfg.json --out dir``.

Config layout (JSON, unknown keys rejected)::

    {
      "task": "certify",
      "spec": {"kind": "carpet", "widths": [...], "heights": [...], "digits": [[1, 1], ...]},
      "measure": {"kind": "split", "tau": "2", "depth": 6},
      "params": {"K": 2},
      "seed": 0,
      "budget": 2000000
    }

Exit codes: 0 success, 2 config error, 3 budget exceeded, 4 internal
consistency failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from fractions import Fraction
from importlib import metadata
from pathlib import Path

from .adversary import build_program, decay_curve, solve_exact, solve_iterative
from .certify import thinness_certificate
from .errors import (
    ConfigError,
    DegenerateMass,
    DisjointnessViolation,
    EnumerationBudget,
    InvalidParameter,
    InvalidSpec,
    NonConvergence,
    ThinCarpetError,
)
from .geometry import frac
from .measures import (
    AffineFunction,
    GridMeasure,
    PiecewiseLinear,
    SplitParams,
    doubling_constant,
    empirical_exponents,
    face_projection_ratio,
    gen_split_measure_1d,
    graph_cover_mass,
    homogeneity_constant,
    isotropy_constant,
    lebesgue,
    measure_from_json,
    product_measure,
)
from .report import render_levelset, write_outputs
from .systems import DEFAULT_BUDGET, GridSpec, harvest_schedule, level_set, spec_from_dict

TASKS = ("diagnose", "certify", "adversary", "decay", "graph", "render")
EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_CONSISTENCY = 0, 2, 3, 4

TOP_KEYS = {"task", "spec", "measure", "params", "seed", "budget"}
PARAM_KEYS = {
    "diagnose": {"radii", "level", "isotropy_sides", "homogeneity_s", "dim"},
    "certify": {"K", "n1", "slack", "D_ball"},
    "adversary": {"level", "tau", "solver"},
    "decay": {"levels", "tau", "exact_limit"},
    "graph": {"function", "levels"},
    "render": {"level", "holes", "epoch"},
}
MEASURE_KEYS = {
    "lebesgue": {"kind", "counts"},
    "split": {"kind", "tau", "depth", "seeds", "policy", "levels"},
    "file": {"kind", "path"},
}
NEEDS_MEASURE = {"diagnose", "certify", "graph"}
NEEDS_SPEC = {"certify", "adversary", "decay", "render"}


def version() -> str:
    try:
        return metadata.version("thincarpet")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


def _check_keys(section: dict, allowed: set, where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown field(s) in {where}: {sorted(unknown)}")


def _int(v, name: str, lo: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name} must be an integer")
    if lo is not None and v < lo:
        raise ConfigError(f"{name} must be >= {lo}")
    return v


def _frac(v, name: str) -> Fraction:
    try:
        return frac(v) if not isinstance(v, float) else Fraction(str(v))
    except (TypeError, ValueError, ZeroDivisionError, InvalidParameter) as exc:
        raise ConfigError(f"{name} is not a rational number: {v!r}") from exc


def load_config(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return validate_config(cfg, base=path.parent)


def validate_config(cfg: dict, task: str | None = None, base: Path | None = None) -> dict:
    """Check field names and types; returns a normalised copy."""
    _check_keys(cfg, TOP_KEYS, "config")
    cfg = dict(cfg)
    t = cfg.get("task", task)
    if task is not None and t != task:
        raise ConfigError(f"config task {t!r} does not match subcommand {task!r}")
    if t not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}")
    cfg["task"] = t
    cfg["seed"] = _int(cfg.get("seed", 0), "seed")
    cfg["budget"] = _int(cfg.get("budget", DEFAULT_BUDGET), "budget", 1)
    params = cfg.get("params", {})
    _check_keys(params, PARAM_KEYS[t], "params")
    cfg["params"] = dict(params)
    if t in NEEDS_SPEC or "spec" in cfg:
        if "spec" not in cfg:
            raise ConfigError(f"task {t} needs a spec")
        try:
            spec_from_dict(cfg["spec"])
        except (InvalidSpec, KeyError, TypeError, ValueError, InvalidParameter) as exc:
            raise ConfigError(f"bad spec: {exc}") from exc
    if t in NEEDS_MEASURE:
        m = cfg.get("measure", {"kind": "lebesgue"})
        if not isinstance(m, dict) or m.get("kind") not in MEASURE_KEYS:
            raise ConfigError(f"measure kind must be one of {sorted(MEASURE_KEYS)}")
        _check_keys(m, MEASURE_KEYS[m["kind"]], "measure")
        m = dict(m)
        if m["kind"] == "file":
            p = Path(m.get("path", ""))
            if not p.is_absolute() and base is not None:
                p = base / p
            if not p.is_file():
                raise ConfigError(f"measure file {p} does not exist")
            m["path"] = str(p)
        cfg["measure"] = m
    elif "measure" in cfg:
        raise ConfigError(f"task {t} takes no measure")
    _validate_params(t, cfg["params"])
    return cfg


def _validate_params(task: str, p: dict) -> None:
    if task == "decay":
        levels = p.get("levels")
        if not isinstance(levels, list) or not levels:
            raise ConfigError("decay needs a non-empty level list")
        for n in levels:
            _int(n, "levels[]", 0)
    if task == "graph":
        levels = p.get("levels", list(range(2, 11)))
        if not isinstance(levels, list) or not levels:
            raise ConfigError("graph needs a non-empty level list")
        if "function" not in p:
            raise ConfigError("graph needs a function")
    for key in ("K", "n1", "level", "epoch", "exact_limit"):
        if key in p:
            _int(p[key], key, 0)
    if "solver" in p and p["solver"] not in ("exact", "iterative"):
        raise ConfigError("solver must be exact or iterative")


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_measure(m: dict, dim: int | None, seed: int) -> GridMeasure:
    kind = m["kind"]
    if dim is None and kind != "file":
        dim = 2
    if kind == "lebesgue":
        return lebesgue(dim, m.get("counts"))
    if kind == "file":
        mu = measure_from_json(Path(m["path"]).read_text(encoding="utf-8"))
        if dim is not None and mu.dim != dim:
            raise ConfigError(f"measure file has dimension {mu.dim}, expected {dim}")
        return mu
    seeds = m.get("seeds", [seed + k for k in range(dim)])
    if len(seeds) != dim:
        raise ConfigError(f"split measure needs {dim} seeds")
    try:
        factors = [gen_split_measure_1d(SplitParams(_frac(m.get("tau", 2), "tau"), _int(m.get("depth", 6), "depth", 0),
                                                    _int(s, "seed"), m.get("policy", "random"),
                                                    _int(m.get("levels", 8), "levels", 1)))
                   for s in seeds]
    except InvalidParameter as exc:
        raise ConfigError(str(exc)) from exc
    return product_measure(factors)


def build_function(f: dict):
    if not isinstance(f, dict):
        raise ConfigError("function must be an object")
    kind = f.get("kind")
    if kind == "affine":
        _check_keys(f, {"kind", "const", "grad"}, "function")
        return AffineFunction(_frac(f.get("const", 0), "const"), tuple(_frac(g, "grad") for g in f.get("grad", [1])))
    if kind == "piecewise":
        _check_keys(f, {"kind", "knots"}, "function")
        try:
            return PiecewiseLinear(tuple((_frac(x, "knot"), _frac(y, "knot")) for x, y in f["knots"]))
        except (InvalidParameter, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad knots: {exc}") from exc
    raise ConfigError("function kind must be affine or piecewise")


def _fit_slope(ns, values) -> float | None:
    pts = [(n, math.log(float(v))) for n, v in zip(ns, values) if v > 0]
    if len(pts) < 2:
        return None
    import numpy as np

    return float(np.polyfit([a for a, _ in pts], [b for _, b in pts], 1)[0])


# ---------------------------------------------------------------------------
# Tasks
# ---------------------------------------------------------------------------


def task_diagnose(cfg: dict, spec: GridSpec | None, mu: GridMeasure):
    p = cfg["params"]
    radii = [_frac(r, "radius") for r in p.get("radii", ["1/4", "1/8"])]
    rows, dbl = [], {}
    for r in radii:
        c = doubling_constant(mu, r)
        dbl[str(r)] = c
        rows.append((r, c))
    prof = empirical_exponents(mu, p.get("level"))
    res = {"doubling": dbl, "C": prof.C, "alpha": prof.alpha, "beta": prof.beta,
           "beta_certified": prof.beta_cert, "octaves": prof.octaves}
    sides = p.get("isotropy_sides", [["1/4"] * mu.dim])
    res["isotropy"] = {",".join(str(_frac(x, "side")) for x in s):
                       isotropy_constant(mu, [_frac(x, "side") for x in s]).A for s in sides}
    if mu.dim >= 2:
        lo, hi = face_projection_ratio(mu)
        res["face_projection"] = {"min": lo, "max": hi}
    s = _frac(p.get("homogeneity_s", mu.dim), "homogeneity_s")
    res["homogeneity"] = {"s": s, "C": homogeneity_constant(mu, s).C}
    return res, (("radius", "doubling_constant"), rows), None, True


def task_certify(cfg: dict, spec: GridSpec, mu: GridMeasure):
    p = cfg["params"]
    K = p.get("K", 2)
    if K < 1:
        raise ConfigError("K must be >= 1")
    cert = thinness_certificate(spec, mu, K, p.get("n1", 1), p.get("slack", 10), cfg["budget"],
                                D_ball=_frac(p["D_ball"], "D_ball") if p.get("D_ball") is not None else None)
    epochs = [{"level": e.level, "mass_E": e.mass_E, "mass_G": e.mass_G, "mass_strip": e.mass_strip,
               "c": e.c, "c2": e.c2, "straddling": e.straddling} for e in cert.epochs]
    res = {"levels": list(cert.levels), "epochs": epochs, "c_min": cert.c_min, "bound": cert.bound,
           "mass_last": cert.mass_last, "total": cert.total, "disjoint": cert.disjoint,
           "disjointness_mode": cert.disjointness_mode, "harvest_sum": cert.harvest_sum,
           "valid": cert.valid, "notes": list(cert.notes)}
    if cert.floor is not None:
        res["strip_constant"] = cert.strip
        res["composed_floor"] = cert.floor
    rows = [(e.level, e.mass_E, e.mass_G, e.c) for e in cert.epochs]
    return res, (("level", "mass_E", "mass_G", "c"), rows), None, cert.valid


def task_adversary(cfg: dict, spec: GridSpec, mu):
    p = cfg["params"]
    n = p.get("level", 1)
    tau = _frac(p.get("tau", 2), "tau")
    prog = build_program(level_set(spec, n, cfg["budget"]), tau, cfg["budget"])
    sol = solve_exact(prog) if p.get("solver", "exact") == "exact" else solve_iterative(prog)
    res = {"level": n, "tau": tau, "cells": prog.size, "constraints": len(prog.constraints),
           "value": sol.value, "kind": sol.kind, "iterations": sol.iterations, "certified": sol.certified,
           "exponents": list(sol.exponents) if sol.exponents is not None else None}
    rows = [(i, w, int(i in set(prog.target))) for i, w in enumerate(sol.weights)]
    return res, (("cell", "weight", "target"), rows), None, True


def task_decay(cfg: dict, spec: GridSpec, mu):
    p = cfg["params"]
    tau = _frac(p.get("tau", 2), "tau")
    kw = {"exact_limit": p["exact_limit"]} if "exact_limit" in p else {}
    curve = decay_curve(spec, tau, p["levels"], **kw)
    pts = [{"n": pt.n, "value": pt.value, "kind": pt.kind, "coarsening": pt.coarsening} for pt in curve.points]
    res = {"tau": tau, "points": pts, "rate": curve.rate, "monotone": curve.monotone,
           "strictly_decreasing": curve.strictly_decreasing}
    rows = [(pt.n, pt.value, pt.kind) for pt in curve.points]
    return res, (("n", "value", "kind"), rows), None, True


def task_graph(cfg: dict, spec, mu: GridMeasure):
    p = cfg["params"]
    f = build_function(p["function"])
    levels = [_int(n, "levels[]", 0) for n in p.get("levels", list(range(2, 11)))]
    vals = [graph_cover_mass(mu, f, n, cfg["budget"]) for n in levels]
    slope = _fit_slope(levels, vals)
    mono = all(b <= a for a, b in zip(vals, vals[1:]))
    res = {"levels": levels, "masses": vals, "non_increasing": mono, "log_slope": slope}
    return res, (("n", "cover_mass"), list(zip(levels, vals))), None, True


def task_render(cfg: dict, spec: GridSpec, mu):
    p = cfg["params"]
    n = p.get("level", 2)
    ls = level_set(spec, n, cfg["budget"])
    holes = []
    if p.get("holes", True) and len(spec.digits) < math.prod(spec.grid_shape):
        epoch = max(1, p.get("epoch", 1))
        sched = harvest_schedule(spec, epoch, budget=cfg["budget"])
        boxes = sched.epochs[epoch - 1].boxes
        holes = list(boxes) if boxes else []
    title = f"{spec.kind} level {n}" + (f", {len(holes)} holes" if holes else "")
    svg = render_levelset(ls, holes, title)
    res = {"level": n, "boxes": len(ls), "holes": len(holes)}
    return res, None, svg, True


RUNNERS = {"diagnose": task_diagnose, "certify": task_certify, "adversary": task_adversary,
           "decay": task_decay, "graph": task_graph, "render": task_render}


def run(cfg: dict, out: Path) -> tuple[int, dict]:
    """Execute one validated config; writes outputs and returns (exit code, report)."""
    timings = {}
    t0 = time.perf_counter()
    spec = spec_from_dict(cfg["spec"]) if "spec" in cfg else None
    mu = None
    if cfg["task"] in NEEDS_MEASURE:
        dim = spec.dim if spec is not None else _measure_dim(cfg)
        mu = build_measure(cfg["measure"], dim, cfg["seed"])
    timings["setup"] = time.perf_counter() - t0
    t1 = time.perf_counter()
    result, series, figure, ok = RUNNERS[cfg["task"]](cfg, spec, mu)
    timings["task"] = time.perf_counter() - t1
    report = {"tool": "thincarpet", "version": version(), "task": cfg["task"], "seed": cfg["seed"],
              "config": cfg, "measure": mu.label if mu is not None else None, "result": result,
              "status": "ok" if ok else "inconsistent"}
    write_outputs(out, report, timings, series, figure)
    return (EXIT_OK if ok else EXIT_CONSISTENCY), report


def _measure_dim(cfg: dict) -> int | None:
    if cfg["task"] == "graph":
        f = build_function(cfg["params"]["function"])
        return f.dim + 1
    d = cfg["params"].get("dim")
    return None if d is None else _int(d, "dim", 1)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="thincarpet", description="Thin-carpet experiments.")
    sub = ap.add_subparsers(dest="task", required=True)
    for t in TASKS:
        sp = sub.add_parser(t)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", required=True, type=Path)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--budget", type=int, default=None)
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg["task"] != args.task:
            raise ConfigError(f"config task {cfg['task']!r} does not match subcommand {args.task!r}")
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.budget is not None:
            if args.budget < 1:
                raise ConfigError("budget must be positive")
            cfg["budget"] = args.budget
        code, _ = run(cfg, args.out)
        return code
    except (ConfigError, InvalidSpec) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EnumerationBudget as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (DisjointnessViolation, DegenerateMass, NonConvergence) as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except InvalidParameter as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ThinCarpetError as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY


if __name__ == "__main__":
    sys.exit(main())
