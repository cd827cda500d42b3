import argparse
import logging

from fault_arbiter.commands.common import add_common_arguments
from fault_arbiter.config import RunConfig
from fault_arbiter.pipeline import run_experiment
from fault_arbiter.reporting import format_summary


logger = logging.getLogger(__name__)


COMMAND = "experiment"


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        COMMAND, help="Repeat the whole pipeline over several seeds and compare systems"
    )
    add_common_arguments(parser)
    parser.set_defaults(handler=run)
    return parser


def run(config: RunConfig, args: argparse.Namespace) -> int:
    comparison = run_experiment(config)
    for summary in comparison.systems:
        logger.info(
            f"{summary.system}: accuracy {format_summary(summary.metrics['accuracy'], True)}, "
            f"ECE {format_summary(summary.metrics['ece'], False)}, "
            f"AURC {format_summary(summary.metrics['aurc'], False)}"
        )
    return 0
