"""Command line entry point.

    nogaps run --config cfg.json [--seed S] [--threads T] [--out DIR]
    nogaps certify [--trials N] [--seed S]
    nogaps plot --summary summary.json [--out DIR]
    nogaps lcd --vector v.csv --alpha A --gamma G --cap C [--step H]

Exit codes: 0 success, 1 config error, 2 partial failure, 3 IO error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import ConfigInvalid, PartialFailure
from .harness import ExperimentConfig, Summary, certify_lemmas, export, plot, run_experiment
from .stats import LCDParams, lcd_vector

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_IO = 0, 1, 2, 3


def _write_outputs(summary, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    paths = [export(summary, "json", os.path.join(out_dir, "summary.json")),
             export(summary, "csv", os.path.join(out_dir, "summary.csv"))]
    paths += plot(summary, out_dir)
    return paths


def cmd_run(args):
    try:
        with open(args.config) as f:
            raw = json.load(f)
    except OSError as exc:
        print(f"error: cannot read config {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: config {args.config} is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        raw["master_seed"] = args.seed
    if args.threads is not None:
        raw["threads"] = args.threads
    try:
        cfg = ExperimentConfig.from_dict(raw)
    except (ConfigInvalid, TypeError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or cfg.output_dir or "."
    code = EXIT_OK
    try:
        summary = run_experiment(cfg)
    except PartialFailure as exc:
        print(f"warning: {exc}", file=sys.stderr)
        summary, code = exc.summary, EXIT_PARTIAL
    try:
        paths = _write_outputs(summary, out_dir)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{cfg.kind}: {summary.trials} trials, {summary.failures} failures, {summary.runtime:.1f} s")
    for p in paths:
        print(p)
    return code


def cmd_certify(args):
    report = certify_lemmas(args.trials, args.seed)
    bad = 0
    for name, r in report.items():
        status = "PASS" if r["failed"] == 0 else "FAIL"
        bad += r["failed"] > 0
        print(f"{status} {name:24s} passed={r['passed']} failed={r['failed']} "
              f"skipped={r['skipped']} worst_slack={r['worst_slack']:.3e}")
    return EXIT_PARTIAL if bad else EXIT_OK


def cmd_plot(args):
    try:
        with open(args.summary) as f:
            summary = Summary.from_json(f.read())
    except OSError as exc:
        print(f"error: cannot read {args.summary}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError) as exc:
        print(f"error: {args.summary} is not a summary: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or os.path.dirname(os.path.abspath(args.summary))
    try:
        for p in plot(summary, out_dir):
            print(p)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_lcd(args):
    try:
        x = np.loadtxt(args.vector, delimiter=",", ndmin=1).ravel()
    except OSError as exc:
        print(f"error: cannot read {args.vector}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {args.vector} is not a numeric CSV: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        params = LCDParams(args.alpha, args.gamma, args.cap, args.step)
        lo, hi = lcd_vector(x, params)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps({"lower": lo, "upper": None if hi == float("inf") else hi}))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="nogaps", description="Delocalization experiments and lemma checkers.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int)
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("certify", help="run the deterministic lemma checkers on random instances")
    c.add_argument("--trials", type=int, default=50)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_certify)

    pl = sub.add_parser("plot", help="SVG plots from a summary JSON")
    pl.add_argument("--summary", required=True)
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_plot)

    lc = sub.add_parser("lcd", help="LCD bracket of a vector read from CSV")
    lc.add_argument("--vector", required=True)
    lc.add_argument("--alpha", type=float, required=True)
    lc.add_argument("--gamma", type=float, required=True)
    lc.add_argument("--cap", type=float, required=True)
    lc.add_argument("--step", type=float)
    lc.set_defaults(func=cmd_lcd)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
