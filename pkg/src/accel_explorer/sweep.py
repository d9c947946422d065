"""Generated VGG sweeps: the twelve input resolutions and the 13/18/28/38-layer family.

Cases are independent jobs. With ``ACCEL_EXPLORER_THREADS`` > 1 they run in
a process pool; every job is seeded, so results do not depend on the
worker count or on completion order.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .report import _out_dir, _write_csv, emit_report, run_benchmark
from .zoo import DEPTHS, INPUT_SIZES, vgg16_conv, vgg_depth

THREADS_ENV = "ACCEL_EXPLORER_THREADS"


def worker_count(jobs):
    raw = os.environ.get(THREADS_ENV)
    try:
        cap = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        cap = 1
    return max(1, min(cap, jobs))


@dataclass(frozen=True)
class SweepJob:
    family: str  # "input" or "depth"
    key: int  # case number (1-based) or depth
    paradigm: str
    height: int
    width: int

    def network(self):
        if self.family == "input":
            return vgg16_conv(self.height, self.width)
        return vgg_depth(self.key, self.height, self.width)


def _run(job, platform, params, batch):
    return job, run_benchmark(job.network(), platform, job.paradigm, params, batch)


def run_jobs(jobs, platform, params=None, batch=1):
    """Run ``jobs`` and return ``[(job, report)]`` in job order."""
    jobs = list(jobs)
    workers = worker_count(len(jobs))
    if workers == 1:
        return [_run(j, platform, params, batch) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run, j, platform, params, batch) for j in jobs]
        return [f.result() for f in futures]


def input_jobs(paradigms=("hybrid", "generic"), cases=None):
    cases = range(1, len(INPUT_SIZES) + 1) if cases is None else cases
    return [SweepJob("input", c, p, *INPUT_SIZES[c - 1]) for c in cases for p in paradigms]


def depth_jobs(paradigms=("pipeline", "generic", "hybrid"), depths=DEPTHS, height=224, width=224):
    return [SweepJob("depth", d, p, height, width) for d in depths for p in paradigms]


EFFICIENCY_COLUMNS = ("case", "height", "width", "paradigm", "gops", "frames_per_sec", "dsp_efficiency", "dsp")
DEPTH_COLUMNS = ("depth", "paradigm", "gops", "frames_per_sec", "dsp_efficiency", "dsp")


def series_rows(results):
    """Group sweep results into the efficiency-vs-input and throughput-vs-depth series."""
    eff, depth = [], []
    for job, r in sorted(results, key=lambda jr: (jr[0].family, jr[0].key, jr[0].paradigm)):
        if job.family == "input":
            eff.append((job.key, job.height, job.width, job.paradigm, r.gops, r.frames_per_sec,
                        r.dsp_efficiency, r.resources["dsp"]))
        else:
            depth.append((job.key, job.paradigm, r.gops, r.frames_per_sec, r.dsp_efficiency, r.resources["dsp"]))
    return eff, depth


def emit_sweep(results, out_dir):
    """Per-case report directories plus the two plot-ready series CSVs."""
    path = _out_dir(out_dir)
    for job, report in results:
        emit_report(report, path / f"{job.family}_{job.key:02d}_{job.paradigm}")
    eff, depth = series_rows(results)
    written = []
    if eff:
        _write_csv(path / "efficiency_vs_input.csv", EFFICIENCY_COLUMNS, eff)
        written.append(path / "efficiency_vs_input.csv")
    if depth:
        _write_csv(path / "throughput_vs_depth.csv", DEPTH_COLUMNS, depth)
        written.append(path / "throughput_vs_depth.csv")
    return written
