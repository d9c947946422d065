"""Benchmark orchestration and report emission.

``report.json`` keys always appear in ``REPORT_FIELDS`` order so two runs
can be diffed line by line. CSV files are plain data series; plotting is
left to downstream tools.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ReportIOError, ValidationError
from .generic import gen_dse, generic_throughput
from .hybrid import PsoParams, pso_search
from .network import parse_network, parse_platform
from .pipeline import layer_alpha, optimize_pipeline, stage_resources
from .profiler import profile_network

PARADIGMS = ("pipeline", "generic", "hybrid")
EFFICIENCY_SLACK = 1e-9


def dsp_efficiency(gops, alpha, dsp_allocated, freq):
    """Achieved GOP/s over the allocated DSPs' peak; ``freq`` in Hz."""
    denom = alpha * dsp_allocated * freq / 1e9
    if denom <= 0:
        raise ValueError(f"DSP efficiency undefined for alpha={alpha}, dsp={dsp_allocated}, freq={freq}")
    return gops / denom


@dataclass
class BenchmarkReport:
    model: str
    platform: str
    paradigm: str
    gops: float
    frames_per_sec: float
    dsp_efficiency: float
    alpha: int
    freq_hz: float
    model_gop: float
    resources: dict
    utilization: dict
    config: dict
    warnings: list = field(default_factory=list)
    search_trace: list = field(default_factory=list)
    search_time: float = 0.0
    stages: list = field(default_factory=list)
    schedule: list = field(default_factory=list)
    trace_rows: list = field(default_factory=list)
    resource_split: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        missing = [f.name for f in fields(cls) if f.name not in doc]
        if missing:
            raise ValidationError(f"report is missing fields: {', '.join(missing)}")
        return cls(**{f.name: doc[f.name] for f in fields(cls)})


REPORT_FIELDS = tuple(f.name for f in fields(BenchmarkReport))
SUMMARY_COLUMNS = ("model", "platform", "paradigm", "gops", "frames_per_sec", "dsp_efficiency",
                   "dsp", "bram", "lut", "bw_bits_per_sec")


def _utilization(res, platform):
    return {"dsp": res.dsp / platform.dsp_total, "bram": res.bram / platform.bram_total,
            "lut": res.lut / platform.lut_total, "bw": res.bw / platform.bw_total}


def _stage_rows(design, layers, alpha):
    rows = []
    for stage, layer, cycles, lat in zip(design.stages, layers, design.cycles, design.latencies):
        res = stage_resources(stage, layer, alpha)
        rows.append({"layer": stage.layer_index, "kind": stage.kind, "cpf": stage.cpf, "kpf": stage.kpf,
                     "col": stage.col, "cycles": cycles, "latency_s": lat, "bw_alloc": stage.bw_alloc,
                     "dsp": res.dsp, "bram": res.bram})
    return rows


def _schedule_rows(design):
    return [{"layer": s.layer_index, "dataflow": s.dataflow, "g_fm": s.g_fm, "g_w": s.g_w,
             "l_comp": s.l_comp, "l_w": s.l_w, "l_ifm": s.l_ifm, "l_ofm": s.l_ofm, "l_total": s.l_total}
            for s in design.schedules]


def _generic_summary(config):
    return {"cpf": config.cpf, "kpf": config.kpf, "strategy": config.strategy, "batch": config.batch,
            "cap_abuff": config.cap_abuff, "cap_wbuff": config.cap_wbuff, "cap_fbuff": config.cap_fbuff,
            "dataflows": list(config.per_layer_dataflow)}


def _read(path, what):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise ReportIOError(f"cannot read {what} file {path}: {exc.strerror or exc}") from None


def load_inputs(model, platform):
    """Accept parsed objects or file paths for the model and the platform."""
    if isinstance(model, (str, os.PathLike)):
        model = parse_network(_read(model, "model"))
    if isinstance(platform, (str, os.PathLike)):
        platform = parse_platform(_read(platform, "platform"))
    return model, platform


def _check_efficiency(eff, paradigm):
    # an efficiency above one means the latency model under-counts cycles
    assert 0 < eff <= 1 + EFFICIENCY_SLACK, f"{paradigm} DSP efficiency {eff} outside (0, 1]"


def run_benchmark(model, platform, paradigm="hybrid", params=None, batch=1, literal_double=False):
    """Optimize one paradigm for ``model`` on ``platform`` and return its report.

    ``batch`` applies to the pipeline and generic paradigms; the hybrid
    search picks its own batch bounded by ``params.batch_max``.
    ``literal_double`` selects the double-counting allocation guard for
    the pure pipeline.
    """
    if paradigm not in PARADIGMS:
        raise ValidationError(f"unknown paradigm {paradigm!r}; expected one of {', '.join(PARADIGMS)}")
    if batch < 1:
        raise ValidationError("batch must be >= 1")
    net, platform = load_inputs(model, platform)
    profile = profile_network(net)
    alpha = min(layer_alpha(platform, l) for l in net.layers)
    warnings = list(net.warnings)
    stages, schedule, trace, trace_rows, split, search_time = [], [], [], [], [], 0.0
    if paradigm == "pipeline":
        design = optimize_pipeline(net, platform, batch, literal_double)
        fps = design.frames_per_sec
        res = design.resources
        config = {"batch": batch, "pfs": design.pfs, "literal_double": literal_double}
        stages = _stage_rows(design, net.layers, alpha)
        warnings += design.warnings
    elif paradigm == "generic":
        design = gen_dse(list(net.layers), platform, alpha, batch)
        fps, _ = generic_throughput(design, profile.total_ops)
        res = design.resources
        config = _generic_summary(design.config)
        schedule = _schedule_rows(design)
        warnings += design.warnings
    else:
        design = pso_search(net, platform, params or PsoParams())
        fps = design.frames_per_sec
        res = design.resources
        config = {"rav": design.rav.as_dict(), "pipeline_pfs": design.pipeline.pfs,
                  "pipeline": design.pipeline_resources.as_dict(),
                  "generic": {**_generic_summary(design.generic.config),
                              **{f"res_{k}": v for k, v in design.generic_resources.as_dict().items()}}}
        stages = _stage_rows(design.pipeline, net.layers[:design.rav.sp], alpha)
        split = [{"structure": name, **r.as_dict()} for name, r in
                 (("pipeline", design.pipeline_resources), ("generic", design.generic_resources))]
        schedule = _schedule_rows(design.generic)
        trace = list(design.search_trace)
        trace_rows = [list(r) for r in design.trace_rows]
        search_time = design.search_time
        warnings += design.warnings
    gops = fps * profile.total_ops / 1e9
    # pooling runs outside the DSP array, so only MAC operations count toward DSP efficiency
    eff = dsp_efficiency(fps * profile.mac_ops / 1e9, alpha, res.dsp, platform.freq)
    _check_efficiency(eff, paradigm)
    return BenchmarkReport(model=net.name, platform=platform.name, paradigm=paradigm, gops=gops,
                           frames_per_sec=fps, dsp_efficiency=eff, alpha=alpha, freq_hz=platform.freq,
                           model_gop=profile.total_ops / 1e9, resources=res.as_dict(),
                           utilization=_utilization(res, platform), config=config, warnings=warnings,
                           search_trace=trace, search_time=search_time, stages=stages, schedule=schedule,
                           trace_rows=trace_rows, resource_split=split)


def _out_dir(out_dir):
    if out_dir is None or str(out_dir).strip() == "":
        raise ValidationError("an output directory is required")
    path = Path(out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportIOError(f"cannot create output directory {path}: {exc.strerror or exc}") from None
    return path


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc.strerror or exc}") from None


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc.strerror or exc}") from None


def summary_row(report):
    r = report.resources
    return (report.model, report.platform, report.paradigm, report.gops, report.frames_per_sec,
            report.dsp_efficiency, r["dsp"], r["bram"], r["lut"], r["bw"])


def _dict_rows(rows):
    if not rows:
        return (), []
    header = tuple(rows[0])
    return header, [[row[k] for k in header] for row in rows]


def emit_report(report, out_dir):
    """Write report.json, summary.csv and the per-design detail series; returns the written paths."""
    path = _out_dir(out_dir)
    written = []
    target = path / "report.json"
    _write_text(target, json.dumps(report.to_dict(), indent=2) + "\n")
    written.append(target)
    target = path / "summary.csv"
    _write_csv(target, SUMMARY_COLUMNS, [summary_row(report)])
    written.append(target)
    for name, rows in (("stages.csv", report.stages), ("schedule.csv", report.schedule),
                       ("resource_split.csv", report.resource_split)):
        if rows:
            header, body = _dict_rows(rows)
            _write_csv(path / name, header, body)
            written.append(path / name)
    if report.trace_rows:
        _write_csv(path / "trace.csv", ("iteration", "best_gops", "sp", "batch"), report.trace_rows)
        written.append(path / "trace.csv")
    return written


def load_report(path):
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc.strerror or exc}") from None
    return BenchmarkReport.from_dict(doc)


def gops_consistent(report, rel=1e-9):
    """Reported GOP/s equals frames/s times the model's GOP."""
    expected = report.frames_per_sec * report.model_gop
    return abs(report.gops - expected) <= rel * max(abs(expected), 1e-300)


__all__ = ["BenchmarkReport", "PARADIGMS", "REPORT_FIELDS", "SUMMARY_COLUMNS", "dsp_efficiency",
           "emit_report", "gops_consistent", "load_inputs", "load_report", "run_benchmark", "summary_row"]
