import argparse

from fault_arbiter.commands import (
    arbitrate,
    calibrate,
    diagnose,
    evaluate,
    experiment,
    extract,
    report,
    serve_replay,
    sweep,
    synth,
    train,
)

COMMANDS = (synth, extract, train, diagnose, arbitrate, calibrate, evaluate, report, sweep, experiment, serve_replay)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fault-arbiter",
        description="Rotating-machinery fault diagnosis with cognitive arbitration and calibrated abstention",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for module in COMMANDS:
        module.register(subparsers)
    return parser
