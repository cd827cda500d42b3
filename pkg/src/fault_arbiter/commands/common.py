"""Flags shared by every subcommand and their mapping onto RunConfig overrides."""

import argparse
from pathlib import Path
from typing import Any

from fault_arbiter.config import LOG_LEVELS
from fault_arbiter.schemas.enums import BackendKind


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="TOML configuration file")
    parser.add_argument("--seed", type=int, default=None, help="Base random seed")
    parser.add_argument("--out", type=Path, default=None, help="Output directory (artifact root)")
    parser.add_argument(
        "--backend",
        choices=[kind.value for kind in BackendKind],
        default=None,
        help="Arbiter backend",
    )
    parser.add_argument("--per-class", type=int, default=None, help="Recordings per machine state")
    parser.add_argument("--repeats", type=int, default=None, help="Seeds in a repeated experiment")
    parser.add_argument(
        "--log-level",
        type=str.upper,
        choices=LOG_LEVELS,
        default=None,
        help="Root log level",
    )


def config_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Nested RunConfig overrides for the flags that were given."""
    overrides: dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.log_level is not None:
        overrides["log_level"] = args.log_level
    if args.backend is not None:
        overrides["arbitration"] = {"backend": args.backend}
    if args.per_class is not None:
        overrides["synth"] = {"per_class": args.per_class}
    if args.repeats is not None:
        overrides["experiment"] = {"repeats": args.repeats}
    return overrides
