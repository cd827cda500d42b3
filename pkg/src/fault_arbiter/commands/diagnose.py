import argparse
import logging

from fault_arbiter.commands.common import add_common_arguments
from fault_arbiter.config import RunConfig
from fault_arbiter.pipeline import DiagnosisPipeline


logger = logging.getLogger(__name__)


COMMAND = "diagnose"


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(COMMAND, help="Rule-engine diagnosis of every recording")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)
    return parser


def run(config: RunConfig, args: argparse.Namespace) -> int:
    pipeline = DiagnosisPipeline(config)
    rows = pipeline.diagnose()
    logger.info(f"Wrote {len(rows)} diagnoses to {pipeline.paths.diagnoses}")
    return 0
