"""Command line entry point.

    singcbf run <config> [--no-cbf] [--out DIR]
    singcbf map <config> --out DIR
    singcbf metrics <dir-cbf> <dir-nocbf> [--plots DIR]

Exit codes: 0 ok, 1 invalid configuration, 2 runtime failure.  Set
SINGCBF_LOG_LEVEL (e.g. DEBUG, WARNING) to change log verbosity.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigErrors, parse_config
from .errors import (ConfigurationError, ContractViolation, IntegrationBlowup, QPInfeasible, ScenarioFailed,
                     SingularCost)
from .harness import compare_runs, run_map, run_scenario

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
LOG_ENV = "SINGCBF_LOG_LEVEL"
RUNTIME_ERRORS = (IntegrationBlowup, QPInfeasible, ScenarioFailed, SingularCost, ContractViolation,
                  FloatingPointError)


def _setup_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _print_report(report):
    # one key,value pair per line so the output stays greppable
    for key, value in report.to_dict().items():
        if isinstance(value, dict):
            for ch, v in value.items():
                print(f"{key}.{ch},{v:.9g}")
        elif value is None:
            print(f"{key},")
        elif isinstance(value, float):
            print(f"{key},{value:.9g}")
        else:
            print(f"{key},{value}")


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    out = args.out or cfg.output_dir or Path("runs") / Path(args.config).stem
    result = run_scenario(cfg, out, cbf=False if args.no_cbf else None)
    for f in result.files:
        print(f"wrote,{f}")
    if result.report is not None:
        _print_report(result.report)
    return EXIT_OK


def cmd_map(args) -> int:
    cfg = parse_config(args.config)
    result = run_map(cfg, args.out, plots=cfg.plots)
    for f in result.files:
        print(f"wrote,{f}")
    obs = result.obstacles
    print(f"n_samples,{len(obs.samples)}")
    print(f"n_components,{obs.mesh.n_components}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    report = compare_runs(args.dir_cbf, args.dir_nocbf, args.plots)
    _print_report(report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="singcbf", description="Singularity-avoiding CBF safety filter scenarios")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write its log, metrics and figures")
    r.add_argument("config")
    r.add_argument("--no-cbf", action="store_true", help="run the unfiltered reference controller")
    r.add_argument("--out", help="output directory (default: config output_dir or runs/<config name>)")
    r.set_defaults(fn=cmd_run)

    m = sub.add_parser("map", help="sample and mesh the singular set of the magnetic rig")
    m.add_argument("config")
    m.add_argument("--out", required=True)
    m.set_defaults(fn=cmd_map)

    c = sub.add_parser("metrics", help="compare a filtered run with an unfiltered one")
    c.add_argument("dir_cbf")
    c.add_argument("dir_nocbf")
    c.add_argument("--plots", help="also write comparison figures to this directory")
    c.set_defaults(fn=cmd_metrics)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigErrors as exc:
        print(f"invalid configuration {args.config if hasattr(args, 'config') else ''}:", file=sys.stderr)
        for e in exc.errors:
            print(f"  - {e}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigurationError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except RUNTIME_ERRORS as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
