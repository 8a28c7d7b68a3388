"""Command line entry point: ``nonlocal-lab run|validate|version``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, ExperimentConfig, parse_config
from .experiments import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, resolve_threads, run_experiment


def _load(path: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError([f"line 0: cannot read {path}: {err.strerror}"]) from err
    return parse_config(text)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nonlocal-lab",
                                description="Nonlocal Harnack/regularity experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment and write its CSV")
    run.add_argument("--config", required=True)
    run.add_argument("--output", help="output directory (overrides the config)")
    run.add_argument("--threads", type=int, help="worker threads (default: $LAB_THREADS or 1)")
    val = sub.add_parser("validate", help="check a config without solving")
    val.add_argument("--config", required=True)
    sub.add_parser("version", help="print the package version")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    try:
        cfg = _load(args.config)
        threads = resolve_threads(args.threads) if args.command == "run" else 1
    except ConfigError as err:
        for e in err.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.command == "validate":
        print(f"ok: {cfg.experiment} (config hash {cfg.digest()})")
        return EXIT_OK

    result = run_experiment(cfg, args.output, threads)
    summary = ", ".join(f"{k}={v:.6g}" for k, v in result.constants.items())
    print(f"{cfg.experiment}: {len(result.rows)} rows -> {result.path}"
          + (f" ({summary})" if summary else ""))
    for e in result.errors:
        print(f"solver failure: {e}", file=sys.stderr)
    return EXIT_SOLVER if result.status == EXIT_SOLVER else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
