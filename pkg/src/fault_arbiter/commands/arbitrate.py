import argparse
import logging
from collections import Counter

from fault_arbiter.commands.common import add_common_arguments
from fault_arbiter.config import RunConfig
from fault_arbiter.pipeline import DiagnosisPipeline


logger = logging.getLogger(__name__)


COMMAND = "arbitrate"


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        COMMAND, help="Consult the arbiter on the validation and test cases"
    )
    add_common_arguments(parser)
    parser.set_defaults(handler=run)
    return parser


def run(config: RunConfig, args: argparse.Namespace) -> int:
    pipeline = DiagnosisPipeline(config)
    try:
        cases = pipeline.arbitrate()
    finally:
        pipeline.close()
    decisions = Counter(case.outcome.decision.value for case in cases)
    logger.info(
        f"Arbitrated {len(cases)} cases: "
        + ", ".join(f"{name}={count}" for name, count in sorted(decisions.items())),
        extra={"decisions": dict(decisions)},
    )
    return 0
