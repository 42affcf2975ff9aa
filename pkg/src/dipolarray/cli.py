"""Command-line entry point: validated JSON configs in, CSV/JSON artifacts out.

Exit codes: 0 success, 2 configuration/validation error, 3 numerical
convergence or fit failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import time
from pathlib import Path

import jsonschema

from . import __version__
from .experiments import RUNNERS
from .utils import (ConvergenceError, FitError, IntegrationError,
                    LightConePoleError, set_max_threads)

EXPERIMENTS = sorted(RUNNERS)

_NUMBER = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": EXPERIMENTS},
        "seed": {"type": "integer", "minimum": 0},
        "physical": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "lambda_nm": _POS,
                "gamma0_mhz": _POS,
                "spacing": dict(_POS, maximum=0.5),
                "mu_b": _NUMBER,
            },
        },
        "regularization": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "a_ho_ratio": dict(_POS, maximum=0.5),
                "g_cutoff": {"type": "number", "exclusiveMinimum": 0,
                             "exclusiveMaximum": 1},
            },
        },
        "bands": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "path": {"type": "array", "minItems": 1,
                         "items": {"enum": ["Gamma", "K", "M"]}},
                "n_per_segment": {"type": "integer", "minimum": 2},
            },
        },
        "chern": {
            "type": "object", "additionalProperties": False,
            "properties": {"grid_n": {"type": "integer", "minimum": 12}},
        },
        "gapscan": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "field_max": _POS,
                "n_fields": {"type": "integer", "minimum": 2},
                "grid_n": {"type": "integer", "minimum": 12},
            },
        },
        "spacing-scan": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "spacings": {"type": "array", "minItems": 2,
                             "items": dict(_POS, maximum=0.1)},
                "grid_n": {"type": "integer", "minimum": 12},
            },
        },
        "stripe": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "edge_type": {"enum": ["bearded", "armchair", "zigzag"]},
                "rows": {"type": "integer", "minimum": 4},
                "cols": {"type": "integer", "minimum": 4},
                "images": {"type": "integer", "minimum": 0},
            },
        },
        "evolve": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "rings": {"type": "integer", "minimum": 2},
                "with_defect": {"type": "boolean"},
                "omega": _POS,
                "detuning": _NUMBER,
                "t_end": _POS,
                "dt": dict(_POS, maximum=0.01),
                "snapshot_stride": {"type": "integer", "minimum": 1},
                "snapshot_times": {"type": "array", "items": _POS},
            },
        },
        "bound": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "rings": {"type": "integer", "minimum": 2},
                "omega": _POS,
                "detuning": _NUMBER,
                "t_off": _POS,
                "t_end": _POS,
                "dt": dict(_POS, maximum=0.01),
            },
        },
        "lifetimes": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "rings": {"type": "array", "minItems": 2,
                          "items": {"type": "integer", "minimum": 2}},
                "grid_n": {"type": "integer", "minimum": 12},
            },
        },
        "fluct": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "ratios": {"type": "array", "minItems": 1,
                           "items": {"type": "number", "minimum": 0,
                                     "maximum": 0.4}},
                "samples": {"type": "integer", "minimum": 8},
                "grid_n": {"type": "integer", "minimum": 12},
            },
        },
    },
}

DEFAULTS = {
    "seed": 0,
    "physical": {"lambda_nm": 790.0, "gamma0_mhz": 6.0, "spacing": 0.05,
                 "mu_b": 12.0},
    "regularization": {"a_ho_ratio": 0.05, "g_cutoff": 1e-12},
    "bands": {"path": ["M", "Gamma", "K"], "n_per_segment": 60},
    "chern": {"grid_n": 24},
    "gapscan": {"field_max": 40.0, "n_fields": 41, "grid_n": 24},
    "spacing-scan": {"spacings": [0.02, 0.025, 0.03, 0.035, 0.04, 0.045, 0.05],
                     "grid_n": 24},
    "stripe": {"edge_type": "bearded", "rows": 42, "cols": 40, "images": 20},
    "evolve": {"rings": 14, "with_defect": True, "omega": 0.2,
               "detuning": 15.0, "t_end": 20.0, "dt": 5e-3,
               "snapshot_stride": 20, "snapshot_times": [5.7]},
    "bound": {"rings": 14, "omega": 1.0, "detuning": 10.0, "t_off": 8.0,
              "t_end": 14.0, "dt": 5e-3},
    "lifetimes": {"rings": [4, 6, 8, 10], "grid_n": 24},
    "fluct": {"ratios": [0.0, 0.05, 0.1, 0.15, 0.2, 0.25], "samples": 2000,
              "grid_n": 18},
}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return apply_defaults(raw)


def apply_defaults(raw: dict) -> dict:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field {path}: {exc.message}") from exc
    cfg = copy.deepcopy(DEFAULTS)
    for key, val in raw.items():
        if isinstance(val, dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    return cfg


def _cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"INVALID: {exc}", file=sys.stderr)
        return 2
    print("OK")
    print("effective configuration (defaults applied):")
    print(json.dumps({k: cfg[k] for k in
                      ("experiment", "seed", "physical", "regularization",
                       cfg["experiment"])}, indent=2, sort_keys=True))
    return 0


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.threads is not None:
        set_max_threads(args.threads)
    outdir = Path(args.out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    runner = RUNNERS[cfg["experiment"]]
    try:
        artifacts = runner(cfg, outdir, threads=args.threads)
    except (ConvergenceError, FitError, IntegrationError,
            LightConePoleError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    manifest = {
        "config": cfg,
        "version": __version__,
        "wall_time_s": time.perf_counter() - t0,
        "seed": cfg["seed"],
        "threads": args.threads,
        "artifacts": sorted(artifacts),
    }
    from .utils import write_json
    write_json(outdir / "manifest.json", manifest)
    if args.verbose:
        print(f"wrote {len(artifacts) + 1} artifacts to {outdir}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dipolarray",
        description="Band structure, topology and driven dynamics of 2D "
                    "honeycomb dipolar emitter arrays")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--verbose", action="store_true")
    p_run.set_defaults(fn=_cmd_run)
    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(fn=_cmd_validate)
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
