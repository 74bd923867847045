"""Command-line experiment runner.

    spncn run --config preset:xo --trials 10 --out runs/xo
    spncn run --config my.cfg --set alpha_u=0.001 --set layers=400,200
    spncn presets

Exit status: 0 on success, 2 for config errors, 3 for dataset errors,
4 for numeric failures.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import parse_config, preset_names
from .exceptions import ConfigError, DatasetError, NumericInputError

log = logging.getLogger("spncn")


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spncn", description="Spiking neural coding network experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("--config", required=True, help="config file, or preset:<name>")
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--out")
    run.add_argument("--task")
    run.add_argument("--model")
    run.add_argument("--export-embeddings", action="store_true")
    run.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    run.add_argument("-v", "--verbose", action="store_true")

    sub.add_parser("presets", help="list bundled presets")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        print("\n".join(preset_names()))
        return 0

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    # imported late so `spncn presets` stays cheap
    from .experiments import run_experiment

    try:
        overrides = _parse_set(args.set)
        for key in ("seed", "trials", "out", "task", "model"):
            value = getattr(args, key)
            if value is not None:
                overrides[key] = str(value)
        if args.export_embeddings:
            overrides["export_embeddings"] = "true"
        cfg = parse_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        results = run_experiment(cfg)
    except DatasetError as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return 3
    except NumericInputError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4

    for r in results:
        parts = ", ".join(f"{k}={v:.4g}" for k, v in r.summary.items() if v is not None)
        print(f"trial {r.trial}: {parts}")
    print(f"outputs in {cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
