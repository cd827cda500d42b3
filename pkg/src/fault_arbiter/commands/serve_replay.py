import argparse
import logging
from pathlib import Path

import uvicorn

from fault_arbiter.commands.common import add_common_arguments
from fault_arbiter.config import RunConfig
from fault_arbiter.exceptions import ConfigurationError
from fault_arbiter.replay_server import create_replay_app, load_recordings


logger = logging.getLogger(__name__)


COMMAND = "serve-replay"


def register(subparsers: argparse._SubParsersAction) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        COMMAND, help="Serve recorded arbiter reports through a chat-completions endpoint"
    )
    add_common_arguments(parser)
    parser.add_argument("--recordings", type=Path, default=None, help="JSONL file of recorded responses")
    parser.add_argument("--host", default=None, help="Bind address")
    parser.add_argument("--port", type=int, default=None, help="Bind port")
    parser.set_defaults(handler=run)
    return parser


def run(config: RunConfig, args: argparse.Namespace) -> int:
    settings = config.replay
    recordings = args.recordings or settings.recordings
    if recordings is None:
        raise ConfigurationError(
            message="No recordings file given",
            config_key="replay.recordings",
            details={"suggestion": "Pass --recordings or set [replay] recordings in the config file"},
        )
    app = create_replay_app(load_recordings(recordings))
    host, port = args.host or settings.host, args.port or settings.port
    logger.info(f"Serving recorded responses on http://{host}:{port}/v1/chat/completions")
    uvicorn.run(app, host=host, port=port, log_level=config.log_level.lower())
    return 0
