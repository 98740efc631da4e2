"""Command line entry point: ``maibl run|metrics|table|validate-map``."""

import argparse
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

from . import harness
from .env import MapError, read_map
from .harness import FIELDS, OUTPUT_ENV, ConfigError, ExperimentConfig

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

_HELP = {
    "model": "model id: " + ", ".join(harness.MODELS),
    "scenario": "reward scenario 1-4",
    "map": "map file (default: shipped 16x16 map)",
    "output": f"output directory (env {OUTPUT_ENV} overrides the default and config file)",
    "workers": "parallel worker processes over runs",
    "full_trace": "store per-step events in the trace files",
    "grasp_hold": "an agent on a grasp cell holds the item until pickup",
    "blend_temperature": "blending temperature (default noise*sqrt(2))",
    "temperature": "Boltzmann exploration temperature",
    "temp_decay": "lenient-q temperature multiplier",
}


def _add_config_flags(p):
    p.add_argument("--config", metavar="FILE", help="key = value config file; flags override it")
    for f in fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type is bool or f.type == "bool":
            p.add_argument(flag, dest=f.name, default=None, metavar="BOOL", help=_HELP.get(f.name))
        else:
            p.add_argument(flag, dest=f.name, default=None, help=_HELP.get(f.name, f"default {f.default}"))


def config_from_args(args, environ=None):
    environ = os.environ if environ is None else environ
    file_values = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
        file_values = harness.parse_config_text(text)
    overrides = {name: getattr(args, name) for name in FIELDS if getattr(args, name, None) is not None}
    if "output" not in overrides and environ.get(OUTPUT_ENV):
        overrides["output"] = environ[OUTPUT_ENV]
    return harness.make_config(file_values, overrides)


def cmd_run(args):
    config = config_from_args(args)
    res = harness.run_experiment(config)
    for run, err in res.failures.items():
        print(f"warning: run {run} failed and was excluded", file=sys.stderr)
    print(harness.summary_text(config.model, config.scenario, res.rows), end="")
    print(f"wrote {config.output}", file=sys.stderr)
    return EXIT_OK


def cmd_metrics(args):
    config, summaries, rows = harness.recompute(args.dir)
    text = harness.summary_text(config.model, config.scenario, rows)
    if args.write:
        (Path(args.dir) / "summary.csv").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_table(args):
    records = []
    for d in args.dirs:
        p = Path(d)
        p = p / "summary.csv" if p.is_dir() else p
        try:
            records.extend(harness.read_summary(p))
        except (OSError, KeyError, ValueError) as e:
            raise ConfigError(f"cannot read summary {p}: {e}") from None
    print(harness.render_table(records, args.format), end="")
    return EXIT_OK


def cmd_validate_map(args):
    try:
        gmap = read_map(args.path)
    except OSError as e:
        raise ConfigError(f"cannot read {args.path}: {e}") from None
    except MapError as e:
        raise ConfigError(f"{args.path}: {e}") from None
    h, w = gmap.shape
    print(f"ok: {w}x{h}, item at {gmap.item_start}, agents at {gmap.agent_starts[0]} and {gmap.agent_starts[1]}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="maibl", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("metrics", help="recompute metrics from a run directory's traces")
    p.add_argument("dir")
    p.add_argument("--write", action="store_true", help="rewrite summary.csv in place")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("table", help="render aggregate summaries as a table")
    p.add_argument("dirs", nargs="+", help="run directories or summary.csv files")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("validate-map", help="check a map file")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate_map)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
