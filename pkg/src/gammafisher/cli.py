"""Command-line entry point: ``gammafisher {landscape,spectrum,gamma,simulate,all}``.

Exit codes: 0 on success (assumption failures are data), 2 on an invalid
configuration (nothing is written), 3 on a hard numerical error.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import io as gio
from .errors import NumericalError
from .functionals import gibbs_measure
from .grid import Grid
from .landscape import analyze
from .langevin import exit_time_experiment, simulate, stable_dt, total_variation
from .potential import from_config
from .quasimodes import gamma_witness_suite
from .spectral import (build_generator, compare_spectra, harmonic_spectrum, kramers_predictions,
                       lowest_eigenpairs)

log = logging.getLogger("gammafisher")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
SUBCOMMANDS = ("landscape", "spectrum", "gamma", "simulate", "all")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_opt_pos = {"type": ["number", "null"], "exclusiveMinimum": 0}
_box = {"type": "array", "minItems": 1, "maxItems": 2,
        "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["potential"],
    "properties": {
        "potential": {
            "type": "object", "additionalProperties": False, "required": ["family"],
            "properties": {
                "family": {"enum": ["double_well", "harmonic", "polynomial"]},
                "params": {"type": "object"},
                "box": _box,
                "name": {"type": "string"},
            },
        },
        "grid": {
            "type": "object", "additionalProperties": False,
            "properties": {"resolution": {"type": ["integer", "array", "null"], "minimum": 3,
                                          "items": {"type": "integer", "minimum": 3}}},
        },
        "betas": {"type": "array", "minItems": 1, "items": _pos},
        "Lambda": _opt_pos,
        "delta": _opt_pos,
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "landscape": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "seeds_per_axis": {"type": "integer", "minimum": 2},
                "grid_resolution": {"type": ["integer", "null"], "minimum": 10},
                "grad_tol": _pos, "tie_tol": _pos, "degeneracy_tol": _pos,
            },
        },
        "solver": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "tol": _pos,
                "count": {"type": ["integer", "null"], "minimum": 1, "maximum": 40},
                "guard_level": _pos,
            },
        },
        "spectrum": {
            "type": "object", "additionalProperties": False,
            "properties": {"epsilon": _opt_pos},
        },
        "gamma": {
            "type": "object", "additionalProperties": False,
            "properties": {"betas": {"type": ["array", "null"], "items": _pos},
                           "cutoff_radius": _opt_pos},
        },
        "simulate": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "beta": _pos,
                "n_traj": {"type": "integer", "minimum": 100},
                "dt": _opt_pos,
                "occupation": {
                    "type": "object", "additionalProperties": False,
                    "properties": {"beta": _pos, "T": _pos, "dt": _opt_pos,
                                   "bins": {"type": "integer", "minimum": 2},
                                   "x0": {"type": ["array", "null"], "items": _num}},
                },
            },
        },
    },
}

DEFAULTS = {
    "grid": {"resolution": None},
    "betas": [8.0, 12.0, 16.0, 20.0],
    "Lambda": None,
    "delta": None,
    "seed": 0,
    "output": "out",
    "landscape": {"seeds_per_axis": 16, "grid_resolution": None, "grad_tol": 1e-8,
                  "tie_tol": 1e-6, "degeneracy_tol": 1e-6},
    "solver": {"tol": 1e-10, "count": None, "guard_level": 50.0},
    "spectrum": {"epsilon": None},
    "gamma": {"betas": None, "cutoff_radius": None},
    "simulate": {"beta": 8.0, "n_traj": 200, "dt": None,
                 "occupation": {"beta": 10.0, "T": 1000.0, "dt": None, "bins": 64, "x0": None}},
}


class ConfigError(ValueError):
    pass


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _locate(text: str, path) -> int:
    """Best-effort line number of the JSON key at ``path`` (1-based; 1 if unknown)."""
    keys = [p for p in path if isinstance(p, str)]
    pos = 0
    for key in keys:
        hit = text.find(json.dumps(key), pos)
        if hit < 0:
            break
        pos = hit
    return text.count("\n", 0, pos) + 1


def load_config(path) -> dict:
    """Parse, validate and fill defaults; raises ConfigError with ``file:line:`` diagnostics."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = []
        for e in errors:
            where = "/".join(map(str, e.absolute_path)) or "<root>"
            if e.validator == "additionalProperties":
                extra = [k for k in e.instance if k not in e.schema.get("properties", {})]
                line = _locate(text, list(e.absolute_path) + extra[:1])
            else:
                line = _locate(text, e.absolute_path)
            lines.append(f"{path}:{line}: {where}: {e.message}")
        raise ConfigError("\n".join(lines))
    cfg = _merge(DEFAULTS, raw)
    try:
        potential = from_config(cfg["potential"])
    except (TypeError, ValueError, KeyError) as exc:
        line = _locate(text, ["potential"])
        raise ConfigError(f"{path}:{line}: potential: {exc}") from None
    res = cfg["grid"]["resolution"]
    if isinstance(res, list) and len(res) != potential.dimension:
        raise ConfigError(f"{path}:{_locate(text, ['grid', 'resolution'])}: grid/resolution: "
                          f"need {potential.dimension} entries")
    return cfg


def make_grid(cfg, potential) -> Grid:
    res = cfg["grid"]["resolution"]
    if res is None:
        res = 4001 if potential.dimension == 1 else 201
    shape = res if isinstance(res, list) else [res] * potential.dimension
    return Grid(potential.box, shape)


def _landscape(cfg, potential):
    ls = cfg["landscape"]
    return analyze(potential, seeds_per_axis=ls["seeds_per_axis"],
                   grid_resolution=ls["grid_resolution"], grad_tol=ls["grad_tol"],
                   degeneracy_tol=ls["degeneracy_tol"], tie_tol=ls["tie_tol"])


def run_landscape(ctx):
    report = ctx["report"]
    out = report.to_dict()
    out["n_critical_points"] = len(report.critical_points)
    out["n_barriers"] = len(report.barriers)
    ctx["out"].write_json("landscape.json", out)


def run_spectrum(ctx):
    cfg, report, potential, grid = ctx["cfg"], ctx["report"], ctx["potential"], ctx["grid"]
    pred = harmonic_spectrum(report, cfg["Lambda"])
    count = cfg["solver"]["count"] or min(
        40, max(report.n + 1, sum(m for _, m, _ in pred.clusters) + 2))

    def one(beta):
        gen = build_generator(potential, grid, beta, cfg["solver"]["guard_level"])
        res = lowest_eigenpairs(gen, count, cfg["solver"]["tol"])
        cmp = compare_spectra(res, pred, kramers_predictions(report, beta),
                              cfg["spectrum"]["epsilon"])
        return res, cmp

    results = list(ctx["map"](one, cfg["betas"]))
    ctx["out"].write_json("spectrum.json", {
        "prediction": pred.to_dict(),
        "results": [{"spectrum": r.to_dict(), "comparison": c.to_dict()} for r, c in results],
    })
    rows = [(c.beta, row["k"], row["ell"], row["prediction"], row["ratio"])
            for _, c in results for row in c.kramers]
    ctx["out"].write_text("kramers.csv", gio.csv_text(["beta", "k", "ell", "prediction", "ratio"],
                                                      rows))
    crow = [(c.beta, cl["lambda"], cl["expected"], cl["observed"], int(cl["match"]))
            for _, c in results for cl in c.clusters]
    ctx["out"].write_text("clusters.csv", gio.csv_text(
        ["beta", "lambda", "expected", "observed", "match"], crow))


def run_gamma(ctx):
    cfg = ctx["cfg"]
    betas = cfg["gamma"]["betas"] or cfg["betas"]
    rep = gamma_witness_suite(ctx["report"], ctx["potential"], betas, ctx["grid"],
                              cfg["gamma"]["cutoff_radius"], executor=ctx["executor"])
    ctx["out"].write_text("witness.csv", rep.to_csv(gio.fmt_float))
    ctx["out"].write_json("witness.json", rep.to_dict())


def run_simulate(ctx):
    cfg, report, potential = ctx["cfg"], ctx["report"], ctx["potential"]
    sim = cfg["simulate"]
    summary = {}
    if report.n >= 1 and report.level_ok(1):
        ex = exit_time_experiment(potential, report, sim["beta"], 1, sim["n_traj"], cfg["seed"],
                                  sim["dt"], cfg["delta"], ctx["grid"],
                                  executor=ctx["executor"])
        summary["exit"] = ex.to_dict()
        ctx["out"].write_text("exit_times.csv", gio.csv_text(
            ["trajectory", "time"], [(i, float(t)) for i, t in enumerate(ex.times)]))
    else:
        summary["exit"] = None
        summary["exit_skipped"] = "needs two minima with A.4/A.5 passing for k = 1"
    occ = sim["occupation"]
    grid = Grid(potential.box, (occ["bins"],) * potential.dimension)
    x0 = occ["x0"] if occ["x0"] is not None else list(report.minimum(0).location)
    dt = occ["dt"] or stable_dt(potential, report)
    stats, measure = simulate(potential, occ["beta"], x0, dt, occ["T"], cfg["seed"], grid=grid,
                              occupation=True, report=report)
    tv = total_variation(measure, gibbs_measure(grid, potential, occ["beta"]))
    summary["occupation"] = {"beta": occ["beta"], "T": occ["T"], "dt": dt, "bins": occ["bins"],
                             "x0": x0, "tv_to_gibbs": tv, "end": list(stats.end),
                             "steps": stats.steps}
    ctx["out"].write_json("simulate.json", summary)
    ctx["out"].write_bytes("occupation.bin", gio.grid_dump(grid, measure.density,
                                                           beta=occ["beta"], T=occ["T"]))


RUNNERS = {"landscape": (run_landscape,), "spectrum": (run_spectrum,), "gamma": (run_gamma,),
           "simulate": (run_simulate,),
           "all": (run_landscape, run_spectrum, run_gamma, run_simulate)}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gammafisher", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--out", help="output directory (overrides config 'output')")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--seed", type=int, help="overrides config 'seed'")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(subcommand: str, config_path, out=None, threads: int = 1, seed=None) -> int:
    try:
        cfg = load_config(config_path)
        if threads < 1:
            raise ConfigError("--threads must be at least 1")
        if seed is not None:
            if seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg["seed"] = int(seed)
    except ConfigError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if out is not None:
        cfg["output"] = str(out)
    potential = from_config(cfg["potential"])
    outdir = gio.OutputDir(cfg["output"])
    executor = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        ctx = {"cfg": cfg, "potential": potential, "grid": make_grid(cfg, potential),
               "out": outdir, "executor": executor,
               "map": executor.map if executor is not None else map}
        ctx["report"] = _landscape(cfg, potential)
        outdir.write_json("config_echo.json", {k: v for k, v in cfg.items() if k != "output"})
        for step in RUNNERS[subcommand]:
            log.info("running %s", step.__name__)
            step(ctx)
    except NumericalError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        if outdir.files:
            outdir.write_manifest()
        return EXIT_NUMERICAL
    finally:
        if executor is not None:
            executor.shutdown()
    outdir.write_manifest()
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(under="ignore")
    return run(args.subcommand, args.config, args.out, args.threads, args.seed)


if __name__ == "__main__":
    sys.exit(main())
