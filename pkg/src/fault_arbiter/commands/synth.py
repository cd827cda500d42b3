import argparse
import logging

from fault_arbiter.commands.common import add_common_arguments
from fault_arbiter.config import RunConfig
from fault_arbiter.pipeline import DiagnosisPipeline


logger = logging.getLogger(__name__)


COMMAND = "synth"


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(COMMAND, help="Generate the synthetic dataset")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)
    return parser


def run(config: RunConfig, args: argparse.Namespace) -> int:
    pipeline = DiagnosisPipeline(config)
    dataset = pipeline.synth()
    sizes = ", ".join(f"{split.value}={n}" for split, n in dataset.split_sizes().items())
    logger.info(f"Dataset written to {pipeline.paths.dataset_dir} ({sizes})")
    return 0
