"""Command line: ``charmonic run <config.json>`` and ``charmonic list-experiments``.

Exit codes: 0 all checks pass, 1 a check failed, 2 bad config or unknown experiment.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .experiments import EXPERIMENTS, EXTRA

SCHEMA_ID = "charmonic-report/1"
RNG_NAME = "Philox"

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dim": {"type": "integer", "minimum": 1, "maximum": 8},
                "sizes": {"oneOf": [
                    {"type": "integer", "minimum": 8},
                    {"type": "array", "items": {"type": "integer", "minimum": 8}, "minItems": 1},
                ]},
                "method": {"enum": ["spectral", "fd4"]},
            },
        },
        "metric": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["flat", "conformal", "generic", "homogeneous"]},
                "amplitude": {"type": "number", "minimum": 0},
                "anisotropy": {"type": "number", "minimum": 0},
                "modes": {"type": "integer", "minimum": 1},
            },
        },
        "map": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["identity", "torus", "euclidean", "sphere", "scalar"]},
                "amplitude": {"type": "number", "minimum": 0},
                "modes": {"type": "integer", "minimum": 1},
                "components": {"type": "integer", "minimum": 1},
            },
        },
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "params": {"type": "object"},
        "output_dir": {"type": "string"},
    },
}


class ConfigError(ValueError):
    pass


def registry() -> dict:
    return {**EXPERIMENTS, **EXTRA}


def load_config(path: str | Path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    if cfg["experiment"] not in registry():
        raise ConfigError(f"unknown experiment {cfg['experiment']!r}")
    return cfg


def _default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def run_experiment(cfg: dict, seed: int | None = None) -> tuple[dict, dict]:
    """Run one config; returns the report dict and the CSV tables."""
    seed = cfg.get("seed", 0) if seed is None else seed
    rng = np.random.Generator(np.random.Philox(seed))
    try:
        outcome = registry()[cfg["experiment"]](cfg, rng)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"config not usable by {cfg['experiment']}: {exc}") from exc
    report = {
        "schema": SCHEMA_ID,
        "experiment": cfg["experiment"],
        "seed": seed,
        "rng": RNG_NAME,
        "config": cfg,
        "passed": outcome.passed,
        "checks": [c.to_dict() for c in outcome.checks],
        "metrics": outcome.metrics,
        "tables": sorted(outcome.tables),
    }
    return report, outcome.tables


def write_outputs(report: dict, tables: dict, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True, default=_default) + "\n")
    for name, text in tables.items():
        (out_dir / name).write_text(text)
    return path


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        report, tables = run_experiment(cfg, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out or cfg.get("output_dir") or f"out/{cfg['experiment']}")
    path = write_outputs(report, tables, out_dir)
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']} ({c['relation']} {c['tol']})")
    print(f"report: {path}")
    return 0 if report["passed"] else 1


def _cmd_list(args) -> int:
    for name, fn in EXPERIMENTS.items():
        print(f"{name:26s} {(fn.__doc__ or '').strip().splitlines()[0]}")
    for name, fn in EXTRA.items():
        print(f"{name:26s} {(fn.__doc__ or '').strip().splitlines()[0]}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="charmonic", description="Conformally invariant harmonic map experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.set_defaults(func=_cmd_run)
    ls = sub.add_parser("list-experiments", help="list registered experiments")
    ls.set_defaults(func=_cmd_list)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
