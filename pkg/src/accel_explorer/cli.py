"""Command-line entry point: ``accel-explorer profile|benchmark|explore|sweep``.

Exit codes: 0 success, 2 parse/validation error, 3 infeasible design,
4 file IO error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import fields, replace

from .errors import AccelExplorerError, ParseError, ReportIOError, ValidationError
from .hybrid import PsoParams
from .profiler import PROFILE_COLUMNS, profile_network, profile_rows
from .report import PARADIGMS, _out_dir, _write_csv, emit_report, load_inputs, run_benchmark
from .sweep import depth_jobs, emit_sweep, input_jobs, run_jobs
from .zoo import sample_path

PSO_KEYS = {f.name for f in fields(PsoParams)}
FLAG_KEYS = {"literal_double"}


def resolve(kind, value):
    """A file path, or the name of a shipped sample (e.g. ``ku115``, ``resnet18``)."""
    if value is None:
        raise ValidationError(f"--{kind[:-1]} is required")
    if os.path.exists(value):
        return value
    sample = sample_path(kind, value)
    if os.path.exists(sample):
        return sample
    raise ReportIOError(f"{kind[:-1]} file not found: {value}")


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ReportIOError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config {path}: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    allowed = PSO_KEYS | FLAG_KEYS
    unknown = set(doc) - allowed
    if unknown:
        raise ValidationError(f"config: unknown key(s) {sorted(unknown)}; allowed: {sorted(allowed)}")
    if not isinstance(doc.get("literal_double", False), bool):
        raise ValidationError("config: literal_double must be true or false")
    return doc


def pso_params(args):
    doc = {k: v for k, v in load_config(getattr(args, "config", None)).items() if k in PSO_KEYS}
    try:
        params = PsoParams(**doc)
    except TypeError as exc:
        raise ValidationError(f"config: {exc}") from None
    overrides = {"seed": args.seed, "batch_max": args.batch_max, "population": args.pop,
                 "iterations": args.iters}
    return replace(params, **{k: v for k, v in overrides.items() if v is not None})


def cmd_profile(args):
    net, _ = load_inputs(resolve("models", args.model), None)
    rows = list(profile_rows(profile_network(net)))
    if args.out:
        path = _out_dir(args.out) / "profile.csv"
        _write_csv(path, PROFILE_COLUMNS, rows)
        print(path)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(PROFILE_COLUMNS)
        writer.writerows(rows)


def _print_report(report):
    print(f"{report.model} on {report.platform} [{report.paradigm}]: {report.gops:.1f} GOP/s, "
          f"{report.frames_per_sec:.2f} img/s, DSP efficiency {report.dsp_efficiency:.3f}, "
          f"DSP {report.resources['dsp']} BRAM {report.resources['bram']}")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)


def cmd_benchmark(args, paradigm=None):
    paradigm = paradigm or args.paradigm
    model = resolve("models", args.model)
    platform = resolve("platforms", args.platform)
    params = pso_params(args)
    literal = load_config(args.config).get("literal_double", False)
    if args.out is not None:
        _out_dir(args.out)
    report = run_benchmark(model, platform, paradigm, params if paradigm == "hybrid" else None, args.batch, literal)
    _print_report(report)
    if args.out is not None:
        emit_report(report, args.out)


def cmd_explore(args):
    cmd_benchmark(args, "hybrid")


def cmd_sweep(args):
    _, platform = load_inputs(None, resolve("platforms", args.platform))
    params = pso_params(args)
    jobs = []
    if args.family in ("input", "all"):
        jobs += input_jobs(tuple(args.paradigms))
    if args.family in ("depth", "all"):
        jobs += depth_jobs(tuple(args.paradigms))
    if args.out is None:
        raise ValidationError("sweep needs --out")
    _out_dir(args.out)
    results = run_jobs(jobs, platform, params, args.batch)
    for _, report in results:
        _print_report(report)
    for path in emit_sweep(results, args.out):
        print(path)


def _add_search_flags(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--batch-max", type=int, default=None, dest="batch_max")
    p.add_argument("--pop", type=int, default=None, help="PSO population")
    p.add_argument("--iters", type=int, default=None, help="PSO iterations")
    p.add_argument("--config", default=None, help="JSON object overriding PSO parameters")


def build_parser():
    parser = argparse.ArgumentParser(prog="accel-explorer",
                                     description="DNN accelerator benchmarking and design-space exploration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="per-layer ops, traffic and CTC")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_profile)

    for name, func in (("benchmark", cmd_benchmark), ("explore", cmd_explore)):
        p = sub.add_parser(name, help="optimize one paradigm" if name == "benchmark" else "hybrid PSO search")
        p.add_argument("--model", required=True)
        p.add_argument("--platform", required=True)
        if name == "benchmark":
            p.add_argument("--paradigm", choices=PARADIGMS, default="hybrid")
        p.add_argument("--batch", type=int, default=1, help="batch for the pipeline and generic paradigms")
        p.add_argument("--out", default=None)
        _add_search_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="12 input-size cases and/or the 13-38 layer depth family")
    p.add_argument("--platform", default="ku115")
    p.add_argument("--family", choices=("input", "depth", "all"), default="all")
    p.add_argument("--paradigms", nargs="+", choices=PARADIGMS, default=list(PARADIGMS))
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--out", default=None)
    _add_search_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except AccelExplorerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
