import argparse
import logging

from fault_arbiter.commands.common import add_common_arguments
from fault_arbiter.config import RunConfig
from fault_arbiter.pipeline import DiagnosisPipeline


logger = logging.getLogger(__name__)


COMMAND = "evaluate"


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(COMMAND, help="Evaluate every system on the test split")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)
    return parser


def run(config: RunConfig, args: argparse.Namespace) -> int:
    pipeline = DiagnosisPipeline(config)
    evaluation = pipeline.evaluate()
    for report in evaluation.reports:
        logger.info(
            f"{report.system}: accuracy {100 * report.accuracy:.1f}%, ECE {report.ece:.3f}, "
            f"NLL {report.nll:.3f}, AURC {report.aurc:.3f}, AUACC {report.auacc:.3f}"
        )
    logger.info(f"Comparison table written to {pipeline.paths.comparison}")
    return 0
