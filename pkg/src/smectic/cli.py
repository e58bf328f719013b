"""Command line entry point: ``smectic <experiment> --config <path>``."""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import EXPERIMENTS, ConfigError, ExperimentConfig, parse_config
from .experiments import RUNNERS
from .outputs import OutputDir, OutputError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

log = logging.getLogger("smectic")


def _thread_limit():
    """Cap BLAS/OpenMP pools when SMECTIC_THREADS is set."""
    raw = os.environ.get("SMECTIC_THREADS")
    if not raw:
        return contextlib.nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SMECTIC_THREADS: expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"SMECTIC_THREADS: expected a positive integer, got {raw!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def run_experiment(cfg: ExperimentConfig, out_dir, force: bool = False) -> int:
    """Run ``cfg`` writing into ``out_dir``; returns the process exit code.

    A manifest is always written once the directory exists; on failure it
    lists the artifacts produced so far and carries the error message.
    """
    try:
        out = OutputDir(out_dir, force)
    except OutputError as exc:
        log.error("%s", exc)
        return EXIT_IO
    meta = {"experiment": cfg.experiment, "seed": cfg.seed, "config": cfg.to_dict()}
    try:
        with _thread_limit():
            RUNNERS[cfg.experiment](cfg, out)
    except ConfigError as exc:
        return _fail(out, meta, exc, EXIT_CONFIG)
    except OSError as exc:
        return _fail(out, meta, exc, EXIT_IO)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        return _fail(out, meta, exc, EXIT_NUMERICAL)
    try:
        out.manifest(meta)
    except OutputError as exc:
        log.error("%s", exc)
        return EXIT_IO
    return EXIT_OK


def _fail(out: OutputDir, meta: dict, exc: Exception, code: int) -> int:
    log.error("%s: %s", type(exc).__name__, exc)
    try:
        out.manifest(meta, status="failed", error=f"{type(exc).__name__}: {exc}")
    except OutputError as io_exc:
        log.error("%s", io_exc)
        return EXIT_IO
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="smectic", description="Smectic energy verification experiments.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, type=Path, help="JSON configuration file")
    ap.add_argument("--out", type=Path, default=None, help="output directory (default: smectic-<experiment>)")
    ap.add_argument("--force", action="store_true", help="replace a nonempty output directory")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config, args.experiment)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError(f"seed: must be >= 0, got {args.seed}")
            cfg.seed = args.seed
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    out = args.out if args.out is not None else Path(f"smectic-{args.experiment}")
    code = run_experiment(cfg, out, args.force)
    if code == EXIT_OK:
        log.info("wrote %s", out / "manifest.json")
    return code


if __name__ == "__main__":
    sys.exit(main())
