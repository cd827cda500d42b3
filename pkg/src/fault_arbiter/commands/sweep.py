import argparse
import logging

from fault_arbiter.commands.common import add_common_arguments
from fault_arbiter.config import RunConfig
from fault_arbiter.pipeline import DiagnosisPipeline


logger = logging.getLogger(__name__)


COMMAND = "sweep"


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        COMMAND, help="Sweep theta and delta on the validation split"
    )
    add_common_arguments(parser)
    parser.set_defaults(handler=run)
    return parser


def run(config: RunConfig, args: argparse.Namespace) -> int:
    pipeline = DiagnosisPipeline(config)
    result = pipeline.sweep()
    if not result.constraint_met:
        logger.warning(
            f"No (theta, delta) pair reaches coverage {result.min_coverage}; "
            "reporting the best pair regardless"
        )
    logger.info(
        f"Best pair theta={result.best_theta} delta={result.best_delta}; grid written to {pipeline.paths.sweep}"
    )
    return 0
