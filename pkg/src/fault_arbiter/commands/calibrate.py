import argparse
import logging

from fault_arbiter.commands.common import add_common_arguments
from fault_arbiter.config import RunConfig
from fault_arbiter.pipeline import DiagnosisPipeline


logger = logging.getLogger(__name__)


COMMAND = "calibrate"


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(COMMAND, help="Fit the calibration bundle on the validation split")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)
    return parser


def run(config: RunConfig, args: argparse.Namespace) -> int:
    pipeline = DiagnosisPipeline(config)
    bundle = pipeline.calibrate()
    logger.info(
        f"Calibration bundle (T={bundle.temperature.temperature:.4f}, "
        f"{len(bundle.fit_sample_ids)} validation samples) written to {pipeline.paths.calibration}"
    )
    return 0
