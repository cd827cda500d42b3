import logging
import sys
from typing import Optional, Sequence

from fault_arbiter.commands import build_parser
from fault_arbiter.commands.common import config_overrides
from fault_arbiter.config import initialize_run_config
from fault_arbiter.exception_handlers import cli_error_handler
from fault_arbiter.exceptions import FaultArbiterError


# Configure logging
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of the fault-arbiter command line.

    Parses the subcommand, loads and caches the run configuration, then
    dispatches. Domain errors are reported as one JSON line on stderr and
    turned into the error's exit code.

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)

    try:
        config = initialize_run_config(args.config, config_overrides(args))
        logging.getLogger().setLevel(config.log_level)
        logger.info(f"Running '{args.command}'", extra={"command": args.command})
        return args.handler(config, args)
    except FaultArbiterError as exc:
        return cli_error_handler(exc)


if __name__ == "__main__":
    sys.exit(main())
