"""
Command line interface to multilambda.

Invoke as::

  simulate --config configs/hom.yaml --check

or `python -m multilambda ...`.  Invoke with `--help` for usage info.

Exit status is 0 on success, 1 if a simulation fails, and 2 for usage and
config errors or a tolerance breach with `--check`.
"""

#-------------------------------------------------------------------------------

import argparse
import logging
import re

from   .config import SCENARIOS, SWEEP_PARAMETERS, load_config
from   .exc import ConfigError, DomainError, InsufficientDataError
from   .exc import ModelInconsistencyError, StiffnessError, ToleranceBreach
from   .lib import log
from   .report import FORMATS, check, emit, run

LOG = logging.getLogger(__name__)

#-------------------------------------------------------------------------------

SWEEP_REGEX = re.compile(r"(\w+)=([^:]+):([^:]+):([^:]+)$")

def parse_sweep(spec):
    """
    Parses a sweep `NAME=START:STEP:STOP` into config fields.

    @raise ValueError
      The sweep is malformed or names an unknown parameter.
    """
    match = SWEEP_REGEX.match(spec)
    if match is None:
        raise ValueError(f"sweep must be NAME=START:STEP:STOP: {spec}")
    name, *bounds = match.groups()
    if name not in SWEEP_PARAMETERS:
        raise ValueError(f"unknown sweep parameter: {name}")
    try:
        start, step, stop = map(float, bounds)
    except ValueError:
        raise ValueError(f"sweep bounds must be numbers: {spec}") from None
    return dict(parameter=name, start=start, step=step, stop=stop)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Run multi-Λ cavity simulations from a YAML config.")
    parser.add_argument(
        "--config", metavar="PATH", required=True,
        help="YAML config file")
    parser.add_argument(
        "--scenario", metavar="NAME", choices=SCENARIOS, default=None,
        help="override the configured scenario")
    parser.add_argument(
        "--sweep", metavar="SPEC", default=None,
        help="sweep NAME=START:STEP:STOP, inclusive of STOP")
    parser.add_argument(
        "--check", default=False, action="store_true",
        help="enforce the config's check tolerances")
    parser.add_argument(
        "--oracle", default=False, action="store_true",
        help="compare against exact evolution")
    parser.add_argument(
        "--out", metavar="DIR", default=None,
        help="write results to DIR (default from config)")
    parser.add_argument(
        "--format", choices=FORMATS, default=None,
        help="result format (default from config)")
    parser.add_argument(
        "--seed", metavar="N", type=int, default=None,
        help="override the configured random seed")
    log.add_option(parser)
    args = parser.parse_args(argv)
    log.configure(args.log)

    updates = {}
    if args.scenario is not None:
        updates["scenario.name"] = args.scenario
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.sweep is not None:
        try:
            updates["sweep"] = parse_sweep(args.sweep)
        except ValueError as exc:
            parser.error(str(exc))

    try:
        config = load_config(args.config)
        if updates:
            config = config.with_values(updates)
    except ConfigError as exc:
        parser.error(str(exc))
    except OSError as exc:
        parser.error(f"can't read config: {exc}")

    format = args.format or config["output"]["format"]
    try:
        report = run(config, oracle=args.oracle)
        out = args.out or config["output"]["dir"]
        emit(report, format, out, name=config["output"]["name"])
        if args.check:
            check(report, config)
    except (ConfigError, ToleranceBreach) as exc:
        logging.error(str(exc))
        raise SystemExit(2)
    except (
            DomainError, InsufficientDataError, ModelInconsistencyError,
            StiffnessError, OSError) as exc:
        logging.error(f"simulation failed: {exc}")
        raise SystemExit(1)
    LOG.info(f"run finished in {report.wall_time:.3f} s")


if __name__ == "__main__":
    main()


