"""
Logging setup shared by the library and the `simulate` command.
"""

#-------------------------------------------------------------------------------

import contextlib
import functools
import inspect
import logging
import time
from   logging import DEBUG, INFO, WARNING, ERROR, CRITICAL

from   . import py

#-------------------------------------------------------------------------------

FORMAT = "%(asctime)s.%(msecs)03d [%(levelname)-7s] %(name)s: %(message)s"
DATEFMT = "%H:%M:%S"

LEVEL_NAMES = dict(
    DEBUG   =DEBUG,
    INFO    =INFO,
    WARNING =WARNING,
    ERROR   =ERROR,
    CRITICAL=CRITICAL,
)


def configure(level=WARNING):
    """
    Installs the root handler, once, and sets the root level.
    """
    logging.basicConfig(format=FORMAT, datefmt=DATEFMT)
    logging.getLogger(None).setLevel(ensure_level(level))


def ensure_level(level):
    """
    Converts a level number or name to a level number.

    @raise ValueError
      `level` is not a known level.
    """
    try:
        level = int(level)
    except (TypeError, ValueError):
        try:
            level = LEVEL_NAMES[str(level).upper()]
        except KeyError:
            raise ValueError(f"not a log level: {level}") from None
    if 0 < level:
        return level
    else:
        raise ValueError(f"invalid log level: {level}")


def add_option(parser):
    """
    Adds a `--log LEVEL` option to an `argparse.ArgumentParser`.
    """
    import argparse

    class Action(argparse.Action):

        def __call__(self, parser, namespace, value, option_string):
            try:
                level = ensure_level(value)
            except ValueError as exc:
                parser.error(str(exc))
            configure(level)
            setattr(namespace, self.dest, level)

    parser.add_argument(
        "--log", metavar="LEVEL", default=WARNING, action=Action,
        help="set root logging level to LEVEL")


#-------------------------------------------------------------------------------

def log_call(log=logging.debug, *, show_self=False):
    """
    Returns a decorator that logs calls to a function.

      @log_call(LOG.info)
      def run_hom(model, atoms, light, pulse):
          ...

    @param log
      The logging method to use for logging calls.
    @param show_self
      If false and the decorated function's first argument is named "self",
      the first argument is not included in the log.
    """
    def decorator(fn):
        name = fn.__name__
        params = list(inspect.signature(fn).parameters)
        remove_self = not show_self and params[: 1] == ["self"]

        @functools.wraps(fn)
        def wrapped(*args, **kw_args):
            log(py.format_call(
                name, *(args[1 :] if remove_self else args), **kw_args))
            return fn(*args, **kw_args)

        return wrapped

    return decorator


@contextlib.contextmanager
def timed(logger, stage):
    """
    Logs the wall time spent in a stage at INFO level.

    The yielded dict receives the elapsed seconds under `"elapsed"` when the
    stage ends.
    """
    record = {}
    start = time.perf_counter()
    try:
        yield record
    finally:
        record["elapsed"] = time.perf_counter() - start
        logger.info(f"{stage}: {record['elapsed']:.3f} s")


