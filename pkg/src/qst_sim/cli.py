"""
qst-sim command line.

    qst-sim run <scenario> [--config PATH] [--out DIR] [--steps N] [--threads K]

Exit status: 0 on success, 2 for configuration errors, 3 when the
integration fails numerically.
"""

import argparse
import logging
import os
import sys

from . import __version__
from .config import ConfigError, load_config
from .experiments import THREADS_ENV, resolve_threads
from .integrator import IntegrationError
from .report import emit_plot_data, try_render, write_csv
from .scenarios import DEFAULTS, SCENARIOS, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("qst_sim")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qst-sim",
        description="State transfer between two optomechanical nodes over a fiber.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a named scenario or a custom configuration")
    run.add_argument("scenario", choices=SCENARIOS)
    run.add_argument("--config", metavar="PATH", help="key = value file; overrides the scenario defaults")
    run.add_argument("--out", metavar="DIR", default=".", help="output directory (default: current)")
    run.add_argument("--steps", type=int, metavar="N", help="fixed integrator step count (>= 16)")
    run.add_argument(
        "--threads", type=int, metavar="K",
        help=f"worker threads for sweeps (default: ${THREADS_ENV} or 1)",
    )
    run.add_argument("--no-render", action="store_true", help="skip PNG rendering even if matplotlib is present")
    return parser


def _error(message):
    print(f"qst-sim: error: {message}", file=sys.stderr)


def _resolve(args):
    base = DEFAULTS[args.scenario]
    if args.config:
        config = load_config(args.config, base)
    elif args.scenario == "custom":
        raise ConfigError("the custom scenario requires --config PATH")
    else:
        config = base
    if args.steps is not None:
        if args.steps < 16:
            raise ConfigError(f"--steps must be at least 16, got {args.steps}")
        config = config.replace(steps=args.steps)
    try:
        threads = resolve_threads(args.threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config, threads


def cmd_run(args):
    try:
        config, threads = _resolve(args)
    except ValueError as exc:  # ConfigError and bad QST_SIM_THREADS values
        _error(exc)
        return EXIT_CONFIG

    out_dir = args.out
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        _error(f"cannot create output directory {out_dir}: {exc.strerror}")
        return EXIT_CONFIG

    try:
        result = run_scenario(args.scenario, config, threads)
    except ConfigError as exc:
        _error(exc)
        return EXIT_CONFIG
    except (IntegrationError, FloatingPointError) as exc:
        _error(f"numerical failure: {exc}")
        return EXIT_NUMERICAL

    stem = config.output or args.scenario
    tables = list(result.tables)
    tables[0].name = stem
    for table in tables[1:]:
        if table.name.startswith(args.scenario):
            table.name = stem + table.name[len(args.scenario):]
    try:
        written = [write_csv(t, out_dir) for t in tables]
        written += emit_plot_data(stem, result.panels, out_dir)
    except OSError as exc:
        _error(str(exc))
        return EXIT_CONFIG
    if not args.no_render:
        try:
            png = try_render(os.path.join(out_dir, f"{stem}.plot"))
        except Exception as exc:  # rendering is a convenience; never fail the run for it
            log.warning("rendering failed: %s", exc)
            png = None
        if png:
            written.append(png)
    log.info("wrote %s", ", ".join(written))
    print(f"{result.summary} -> {os.path.join(out_dir, stem + '.csv')}")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "run":
        return cmd_run(args)
    parser.error(f"unknown command {args.command!r}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
