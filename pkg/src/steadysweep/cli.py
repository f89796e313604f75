"""Command line front end.

Verbs: ``list``, ``run``, ``study-scaling``, ``study-convergence`` and
``compare``.  Configuration comes from an optional JSON document
(``--config``); command line flags override its keys.  Exit codes: 0 ok,
2 configuration error, 3 infeasible problem, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import ConfigError, SweepError
from .studies import (compare_with_reference, dimension, make_grid, run_evolve, run_sweep,
                      study_convergence, study_scaling)
from .systems import get_model, list_models
from .validation import check_seed

logger = logging.getLogger("steadysweep")

DEFAULTS = {
    "problem": None,
    "params": {},
    "grid": None,
    "solver": "sweep",
    "brackets": None,
    "k": None,
    "out": "out",
    "seed": 0,
    "sizes": None,
    "repeats": 3,
    "local_lf": True,
}
DEFAULT_GRID = {1: 1024, 2: 128}
DEFAULT_SIZES = {1: [256, 512, 1024, 2048], 2: [64, 128, 256, 512]}
SOLVERS = ("sweep", "evolve", "both")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _parse_grid(text):
    if text is None:
        return None
    if isinstance(text, (int, list)):
        return text
    parts = str(text).lower().replace("x", ",").split(",")
    try:
        vals = [int(p) for p in parts if p.strip()]
    except ValueError:
        raise ConfigError("grid must be N, m or MXxMY", grid=text) from None
    return vals[0] if len(vals) == 1 else vals


def load_config(args):
    """Merge defaults, the JSON config file and command line flags (in that order)."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}", path=args.config) from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object", path=args.config)
        unknown = sorted(set(doc) - set(DEFAULTS))
        if unknown:
            raise ConfigError("unknown config keys", keys=unknown)
        cfg.update(doc)
    for key in ("problem", "solver", "out", "seed", "repeats"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "grid", None) is not None:
        cfg["grid"] = args.grid
    if getattr(args, "sizes", None) is not None:
        cfg["sizes"] = args.sizes
    cfg["grid"] = _parse_grid(cfg["grid"])
    if isinstance(cfg["sizes"], str):
        cfg["sizes"] = [int(s) for s in cfg["sizes"].split(",") if s.strip()]
    if cfg["problem"] is None:
        raise ConfigError("no problem given (use --problem or the config file)")
    if cfg["solver"] not in SOLVERS:
        raise ConfigError(f"unknown solver {cfg['solver']!r}", known=list(SOLVERS))
    check_seed(cfg["seed"])
    return cfg


def _model(cfg):
    return get_model(cfg["problem"], **(cfg["params"] or {}))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if obj is None or isinstance(obj, (str, int, bool)):
        return obj
    return str(obj)


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------

def _component_names(model, n):
    names = getattr(model, "component_names", None)
    if names and len(names) == n:
        return list(names)
    return ["u"] if n == 1 else [f"U{c}" for c in range(n)]


def write_field(path, model, grid, values):
    """Node values as CSV: ``x[,y]`` then components, row-major by ``y`` then ``x``."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if dimension(model) == 1:
            w.writerow(["x"] + _component_names(model, n))
            for x, U in zip(grid.nodes, values):
                w.writerow([repr(float(x))] + [repr(float(v)) for v in U])
        else:
            w.writerow(["x", "y"] + _component_names(model, n))
            xs, ys = grid.x, grid.y
            for j in range(grid.my):
                for i in range(grid.mx):
                    w.writerow([repr(float(xs[i])), repr(float(ys[j]))]
                               + [repr(float(v)) for v in values[j, i]])


def write_curves_2d(path, curves):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["curve", "vertex", "x", "y", "n1", "n2", "rh_residual", "margin_minus",
                    "margin_plus", "degenerate"])
        for c, curve in enumerate(curves):
            for row in curve.to_rows():
                w.writerow([c] + [repr(float(v)) if isinstance(v, float) else v for v in row])


def write_shocks_1d(path, sols):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["solution", "x_S", "node", "rh_residual", "entropy_margin"])
        for s, sol in enumerate(sols):
            if sol.jump is None:
                continue
            w.writerow([s, repr(float(sol.x_S)), sol.shock_node, repr(float(sol.jump.rh_residual)),
                        repr(sol.jump.entropy_margins())])


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Verbs
# ---------------------------------------------------------------------------

def cmd_list(cfg_args):
    print(json.dumps(_jsonable(list_models()), indent=2, sort_keys=True))
    return 0


def _report_base(cfg, verb):
    return {"verb": verb, "version": __version__, "config": cfg, "files": []}


def cmd_run(cfg):
    model = _model(cfg)
    grid = make_grid(model, cfg["grid"] or DEFAULT_GRID[dimension(model)])
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    report = _report_base(cfg, "run")
    io_time = 0.0
    if cfg["solver"] in ("sweep", "both"):
        sols, timings = run_sweep(model, grid, brackets=cfg["brackets"], k=cfg["k"])
        report["timings"] = timings
        t0 = time.perf_counter()
        if dimension(model) == 1:
            for s, sol in enumerate(sols):
                name = "field.csv" if s == 0 else f"field_{s}.csv"
                write_field(os.path.join(out, name), model, grid, sol.states)
                report["files"].append(name)
            write_shocks_1d(os.path.join(out, "curve.csv"), sols)
            report["solutions"] = [sol.summary() for sol in sols]
        else:
            sol = sols[0]
            write_field(os.path.join(out, "field.csv"), model, grid, sol.values)
            write_curves_2d(os.path.join(out, "curve.csv"), sol.curves)
            report["files"].append("field.csv")
            report["solutions"] = [sol.summary()]
        report["files"].append("curve.csv")
        io_time += time.perf_counter() - t0
    if cfg["solver"] in ("evolve", "both"):
        t0 = time.perf_counter()
        run = run_evolve(model, grid, local=bool(cfg["local_lf"]))
        report.setdefault("timings", {})["evolve"] = time.perf_counter() - t0
        report["evolution"] = run.summary()
        name = "field.csv" if cfg["solver"] == "evolve" else "field_lf.csv"
        t0 = time.perf_counter()
        write_field(os.path.join(out, name), model, grid, run.states)
        io_time += time.perf_counter() - t0
        report["files"].append(name)
    report["timings"]["io"] = io_time
    _write_json(os.path.join(out, "report.json"), report)
    report["files"].append("report.json")
    print(json.dumps(_jsonable({"out": out, "files": report["files"], "timings": report["timings"]})))
    return 0


def cmd_compare(cfg):
    model = _model(cfg)
    grid = make_grid(model, cfg["grid"] or DEFAULT_GRID[dimension(model)])
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    sols, timings = run_sweep(model, grid, brackets=cfg["brackets"], k=cfg["k"])
    metrics, run = compare_with_reference(model, grid, solution=sols[0], local=bool(cfg["local_lf"]))
    sol = sols[0]
    values = sol.states if dimension(model) == 1 else sol.values
    write_field(os.path.join(out, "field.csv"), model, grid, values)
    write_field(os.path.join(out, "field_lf.csv"), model, grid, run.states)
    report = _report_base(cfg, "compare")
    report.update({"timings": timings, "comparison": metrics,
                   "files": ["field.csv", "field_lf.csv", "report.json"]})
    _write_json(os.path.join(out, "report.json"), report)
    print(json.dumps(_jsonable({"max_relative_l1": metrics["max_relative_l1"],
                                "in_units_of_h": metrics["in_units_of_h"]})))
    return 0


def cmd_study_scaling(cfg):
    model = _model(cfg)
    sizes = cfg["sizes"] or DEFAULT_SIZES[dimension(model)]
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    res = study_scaling(model, sizes, repeats=int(cfg["repeats"]))
    with open(os.path.join(out, "scaling.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "size", "seconds"])
        w.writerows(res["rows"])
    report = _report_base(cfg, "study-scaling")
    report.update({"slope": res["slope"], "rows": res["rows"], "files": ["scaling.csv", "report.json"]})
    _write_json(os.path.join(out, "report.json"), report)
    print(json.dumps(_jsonable({"slope": res["slope"], "rows": res["rows"]})))
    return 0


def cmd_study_convergence(cfg):
    model = _model(cfg)
    dim = dimension(model)
    sizes = cfg["sizes"] or ([64, 128, 256, 512] if dim == 1 else [64, 128, 256])
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    res = study_convergence(model, sizes)
    with open(os.path.join(out, "convergence.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["size", "h", "l1_error", "shock_error", "order"])
        w.writerows(res["rows"])
    report = _report_base(cfg, "study-convergence")
    report.update({"rows": res["rows"], "files": ["convergence.csv", "report.json"]})
    _write_json(os.path.join(out, "report.json"), report)
    print(json.dumps(_jsonable({"rows": res["rows"]})))
    return 0


VERBS = {"run": cmd_run, "compare": cmd_compare, "study-scaling": cmd_study_scaling,
         "study-convergence": cmd_study_convergence}


def build_parser():
    p = argparse.ArgumentParser(prog="steadysweep", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="verb", required=True)
    sub.add_parser("list", help="list built-in problems")
    for verb, text in (("run", "solve one problem"), ("compare", "sweep vs Lax-Friedrichs"),
                       ("study-scaling", "wall time over a size sequence"),
                       ("study-convergence", "error against the exact solution")):
        s = sub.add_parser(verb, help=text)
        s.add_argument("--problem")
        s.add_argument("--grid", help="N (1D), m or MXxMY (2D)")
        s.add_argument("--config", help="JSON config; flags override its keys")
        s.add_argument("--out", help="output directory")
        s.add_argument("--solver", choices=SOLVERS)
        s.add_argument("--seed", type=int)
        if verb.startswith("study"):
            s.add_argument("--sizes", help="comma separated grid sizes")
        if verb == "study-scaling":
            s.add_argument("--repeats", type=int)
    return p


def _write_error(cfg_out, exc):
    doc = exc.to_dict() if isinstance(exc, SweepError) else {"error": type(exc).__name__,
                                                              "message": str(exc)}
    doc["exit_code"] = getattr(exc, "exit_code", 4)
    try:
        os.makedirs(cfg_out, exist_ok=True)
        _write_json(os.path.join(cfg_out, "errors.json"), doc)
    except OSError:
        pass
    print(json.dumps(_jsonable(doc)), file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.verb == "list":
        return cmd_list(args)
    out = getattr(args, "out", None) or DEFAULTS["out"]
    try:
        cfg = load_config(args)
        out = cfg["out"]
        return VERBS[args.verb](cfg)
    except SweepError as exc:
        _write_error(out, exc)
        return exc.exit_code
    except (FloatingPointError, np.linalg.LinAlgError, OverflowError) as exc:
        _write_error(out, exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
