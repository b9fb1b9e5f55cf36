"""Command-line entry point: ``covdetect <experiment> --config FILE [options]``."""

import argparse
import logging
import os
import sys

from ..exceptions import ConfigError
from .config import EXPERIMENTS, FORMATS, load_config
from .experiments import run
from .output import write_record

log = logging.getLogger("covdetect")


def _threads(value):
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("--threads must be >= 1")
    return n


def build_parser():
    parser = argparse.ArgumentParser(prog="covdetect", description="Covariance-based activity detection experiments.")
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, help="top-level seed (overrides the config)")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--threads", type=_threads, help="worker threads (fallback: COVDETECT_THREADS)")
        p.add_argument("--format", choices=FORMATS, help="output format (overrides the config)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    threads = args.threads
    if threads is None and os.environ.get("COVDETECT_THREADS"):
        try:
            threads = _threads(os.environ["COVDETECT_THREADS"])
        except (ValueError, argparse.ArgumentTypeError):
            print("covdetect: COVDETECT_THREADS must be a positive integer", file=sys.stderr)
            return 2
    overrides = {"experiment": args.experiment, "seed": args.seed, "out": args.out, "threads": threads, "format": args.format}
    try:
        cfg = load_config(args.config, overrides=overrides)
    except ConfigError as exc:
        print(f"covdetect: config error: {exc}", file=sys.stderr)
        return 2
    log.info("running %s with seed %d", cfg.experiment, cfg.seed)
    record = run(cfg)
    for path in write_record(record, cfg.out, cfg.format):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
