import argparse
import logging

from fault_arbiter.commands.common import add_common_arguments
from fault_arbiter.config import RunConfig
from fault_arbiter.pipeline import DiagnosisPipeline


logger = logging.getLogger(__name__)


COMMAND = "extract"


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(COMMAND, help="Extract the feature table from the dataset")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)
    return parser


def run(config: RunConfig, args: argparse.Namespace) -> int:
    pipeline = DiagnosisPipeline(config)
    rows = pipeline.extract()
    logger.info(f"Wrote {len(rows)} feature rows to {pipeline.paths.features}")
    return 0
