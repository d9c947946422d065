"""Hybrid (pipeline prefix + generic suffix) exploration driven by PSO.

A particle position is a continuous 5-vector ``(sp, batch, dsp_p, bram_p,
bw_p)``; ``sp`` and ``batch`` are rounded and the three fractions clamped
to [0.05, 0.95] before evaluation. Fitness is throughput in GOP/s with
infeasible positions scoring 0.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleDesignError, ValidationError
from .generic import (STRATEGIES, array_sequence, evaluate_generic, finalize, gen_resources,
                      make_config, network_bits)
from .network import POOL
from .pipeline import ResourceUsage, bottleneck_topup, evaluate_pipeline, layer_alpha, pow2_floor
from .profiler import profile_network

FRACTION_LO = 0.05
FRACTION_HI = 0.95


@dataclass(frozen=True)
class RAV:
    sp: int
    batch: int
    dsp_p: float
    bram_p: float
    bw_p: float

    def budgets(self, platform):
        """Absolute pipeline budgets (DSP, BRAM blocks, bits/s)."""
        return (int(self.dsp_p * platform.dsp_total), int(self.bram_p * platform.bram_total),
                self.bw_p * platform.bw_total)

    def as_dict(self):
        return {"sp": self.sp, "batch": self.batch, "dsp_p": self.dsp_p, "bram_p": self.bram_p, "bw_p": self.bw_p}


@dataclass(frozen=True)
class PsoParams:
    population: int = 20
    iterations: int = 20
    inertia: float = 0.7
    c1: float = 1.5
    c2: float = 1.5
    seed: int = 0
    stall_limit: int = 2
    batch_max: int = 32
    uniform_halving: bool = True

    def __post_init__(self):
        if self.population < 1 or self.iterations < 1:
            raise ValidationError("population and iterations must be >= 1")
        if not 0 <= self.inertia <= 1:
            raise ValidationError("inertia must lie in [0, 1]")
        if self.c1 < 0 or self.c2 < 0:
            raise ValidationError("acceleration constants must be >= 0")
        if self.batch_max < 1:
            raise ValidationError("batch_max must be >= 1")
        if self.stall_limit < 1:
            raise ValidationError("stall_limit must be >= 1")


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    local_best: np.ndarray
    local_fitness: float = -1.0
    local_design: object = None


@dataclass
class HybridDesign:
    rav: RAV
    pipeline: object
    generic: object
    frames_per_sec: float
    throughput_gops: float
    resources: ResourceUsage
    pipeline_resources: ResourceUsage
    generic_resources: ResourceUsage
    search_trace: list = field(default_factory=list)
    trace_rows: list = field(default_factory=list)
    search_time: float = 0.0
    warnings: list = field(default_factory=list)

    @property
    def sp(self):
        return self.rav.sp

    @property
    def pipeline_latency(self):
        return self.pipeline.max_latency

    @property
    def generic_latency(self):
        return self.generic.total_latency


def decode(position, sp_max, batch_max):
    sp, batch, d, b, w = (float(x) for x in position)
    clamp = lambda x: min(max(x, FRACTION_LO), FRACTION_HI)  # noqa: E731
    return RAV(sp=int(min(max(round(sp), 1), sp_max)), batch=int(min(max(round(batch), 1), batch_max)),
               dsp_p=clamp(d), bram_p=clamp(b), bw_p=clamp(w))


def ctc_parallelism(profile, sp, bw_p_bits, freq):
    """Initial PF per compute layer of the prefix: ceil(OP * BW_p / BW_norm / FREQ), floored to a power of two."""
    norm = profile.bw_total_norm(sp)
    bw_bytes = bw_p_bits / 8
    pfs = []
    for w in profile.per_layer[:sp]:
        if w.kind == POOL:
            continue
        pf = math.ceil(w.ops * bw_bytes / norm / freq) if norm > 0 else 1
        pfs.append(pow2_floor(max(pf, 1)))
    return pfs


def _halve_all(pfs):
    return [max(1, p // 2) for p in pfs]


def _halve_largest(pfs):
    pfs = list(pfs)
    j = max(range(len(pfs)), key=lambda i: pfs[i])
    pfs[j] = max(1, pfs[j] // 2)
    return pfs


def local_optimize_pipeline(rav, layers, profile, platform, uniform=True):
    """CTC-driven PF sizing of the first ``rav.sp`` layers inside the pipeline budgets.

    Returns ``(pfs, design)`` for one pipeline copy. PFs start from the CTC
    formula, are halved (all stages, or only the largest with
    ``uniform=False``) until DSP and BRAM fit, halved further while that
    relieves a bandwidth throttle, then the bottleneck stage is doubled
    while it still fits and helps.
    """
    prefix = layers[:rav.sp]
    dsp_p, bram_p, bw_p = rav.budgets(platform)
    pfs = ctc_parallelism(profile, rav.sp, bw_p, platform.freq)

    def fits(d):
        return d.resources.dsp <= dsp_p and d.resources.bram <= bram_p

    if not pfs:
        # POOL-only prefix: no DSPs, only buffers
        design = evaluate_pipeline(prefix, pfs, platform, 1, bw_p, bram_p)
        return pfs, design
    halve = _halve_all if uniform else _halve_largest
    while True:
        design = evaluate_pipeline(prefix, pfs, platform, 1, bw_p, bram_p)
        if fits(design) or all(p == 1 for p in pfs):
            break
        pfs = halve(pfs)
    # oversubscribed weight streams throttle every stage, so smaller PFs can be faster
    while fits(design) and design.bandwidth_bound and any(p > 1 for p in pfs):
        trial = halve(pfs)
        candidate = evaluate_pipeline(prefix, trial, platform, 1, bw_p, bram_p)
        if candidate.max_latency >= design.max_latency:
            break
        pfs, design = trial, candidate
    if fits(design):
        pfs, design = bottleneck_topup(prefix, pfs, platform, 1, fits, bw_p, bram_p, design=design)
    return pfs, design


@dataclass
class _GenericPlan:
    design: object
    pfs: list
    pipe: object
    fps: float


def _size_generic(suffix, pipe, rav, platform, strategy, alpha, dw, ww):
    """Grow the generic array by doubling until it keeps pace with the pipeline or stops fitting."""
    b = rav.batch
    pres = pipe.resources
    dsp_rem = platform.dsp_total - b * pres.dsp
    bram_rem = platform.bram_total - b * pres.bram
    bw_rem = platform.bw_total - pres.bw
    if dsp_rem <= 0 or bram_rem <= 0 or bw_rem <= 0:
        return None
    target = pipe.max_latency
    best = None
    for cpf, kpf in array_sequence():
        config = make_config(cpf, kpf, strategy, bram_rem, bw_rem, b, dw, ww)
        res = gen_resources(config, alpha)
        if res.dsp > dsp_rem or res.bram > bram_rem or res.lut > platform.lut_total:
            break
        schedules, total = evaluate_generic(suffix, config, platform.freq)
        best = (config, schedules, total)
        if total <= target:
            break
    if best is None:
        return None
    config, schedules, total = best
    return finalize(config, schedules, total, alpha)


def batch_capacity(platform, generic_res, pipe_res):
    """Batch_p: how many pipeline copies fit beside the generic structure."""
    caps = []
    for total, used_g, used_p in ((platform.dsp_total, generic_res.dsp, pipe_res.dsp),
                                  (platform.bram_total, generic_res.bram, pipe_res.bram)):
        if used_p > 0:
            caps.append((total - used_g) // used_p)
    return min(caps) if caps else float("inf")


def local_optimize_generic(rav, layers, pipe_pfs, pipe, platform, uniform=True):
    """Balance-oriented sizing of the generic suffix with pipeline rollback.

    Runs once per buffer strategy. Each round sizes the generic array
    against the current pipeline; if the generic side still lags or the
    batch does not fit, every pipeline PF is halved and the round repeats.
    The best feasible balanced-or-not design seen is kept. Returns a
    ``_GenericPlan`` or ``None`` when nothing fits.
    """
    prefix, suffix = layers[:rav.sp], layers[rav.sp:]
    _, bram_p, bw_p = rav.budgets(platform)
    alpha = min(layer_alpha(platform, l) for l in layers)
    dw, ww = network_bits(suffix)
    best = None
    for strategy in STRATEGIES:
        pfs, current = list(pipe_pfs), pipe
        while True:
            gen = _size_generic(suffix, current, rav, platform, strategy, alpha, dw, ww)
            feasible = gen is not None and rav.batch <= batch_capacity(platform, gen.resources, current.resources)
            if feasible:
                fps = rav.batch / max(current.max_latency, gen.total_latency)
                plan = _GenericPlan(gen, pfs, current, fps)
                if best is None or (fps, -_total_dsp(plan, rav)) > (best.fps, -_total_dsp(best, rav)):
                    best = plan
                if gen.total_latency <= current.max_latency:
                    break
            if not pfs or all(p == 1 for p in pfs):
                break
            pfs = _halve_all(pfs) if uniform else _halve_largest(pfs)
            current = evaluate_pipeline(prefix, pfs, platform, 1, bw_p, bram_p)
    return best


def _total_dsp(plan, rav):
    return plan.pipe.resources.dsp * rav.batch + plan.design.resources.dsp


def _assemble(rav, layers, plan, platform, total_ops):
    prefix = layers[:rav.sp]
    _, bram_p, bw_p = rav.budgets(platform)
    pipe = evaluate_pipeline(prefix, plan.pfs, platform, rav.batch, bw_p, bram_p)
    pipe.warnings = list(plan.pipe.warnings)
    if pipe.bandwidth_bound:
        pipe.warnings.append("bandwidth-bound: pipeline weight streams exceed their bandwidth share")
    fps = rav.batch / max(pipe.max_latency, plan.design.total_latency)
    combined = pipe.resources + plan.design.resources
    return HybridDesign(rav=rav, pipeline=pipe, generic=plan.design, frames_per_sec=fps,
                        throughput_gops=fps * total_ops / 1e9, resources=combined,
                        pipeline_resources=pipe.resources, generic_resources=plan.design.resources,
                        warnings=list(pipe.warnings))


def fitness_score(rav, net, platform, profile=None, uniform=True):
    """(GOP/s, HybridDesign or None). Infeasible positions score 0."""
    layers = list(net.layers)
    if not 1 <= rav.sp <= len(layers) - 1:
        return 0.0, None
    profile = profile_network(net) if profile is None else profile
    pfs, pipe = local_optimize_pipeline(rav, layers, profile, platform, uniform)
    plan = local_optimize_generic(rav, layers, pfs, pipe, platform, uniform)
    if plan is None:
        return 0.0, None
    design = _assemble(rav, layers, plan, platform, profile.total_ops)
    if not design.resources.fits(platform):
        return 0.0, None
    return design.throughput_gops, design


def _key(fitness, design):
    """Ordering for equal fitness: fewer DSPs, then smaller SP."""
    if design is None:
        return (fitness, 0, 0)
    return (fitness, -design.resources.dsp, -design.rav.sp)


def pso_search(net, platform, params=None):
    """Seeded PSO over the RAV box; returns the best HybridDesign with its trace.

    The best is only updated at iteration barriers, so evaluation order
    inside an iteration cannot change the result. The search stops after
    ``stall_limit`` consecutive iterations without improving the global best.
    """
    params = PsoParams() if params is None else params
    n = len(net.layers)
    if n < 2:
        raise InfeasibleDesignError("hybrid exploration needs at least two layers")
    sp_max = n - 1
    profile = profile_network(net)
    rng = np.random.default_rng(params.seed)
    lo = np.array([1.0, 1.0, FRACTION_LO, FRACTION_LO, FRACTION_LO])
    hi = np.array([float(sp_max), float(params.batch_max), FRACTION_HI, FRACTION_HI, FRACTION_HI])
    cache = {}

    def evaluate(pos):
        rav = decode(pos, sp_max, params.batch_max)
        if rav not in cache:
            cache[rav] = fitness_score(rav, net, platform, profile, params.uniform_halving)
        return cache[rav]

    start = time.perf_counter()
    swarm = []
    for _ in range(params.population):
        pos = lo + rng.random(5) * (hi - lo)
        swarm.append(Particle(position=pos, velocity=np.zeros(5), local_best=pos.copy()))

    g_pos, g_fit, g_design = None, -1.0, None
    for p in swarm:
        fit, design = evaluate(p.position)
        p.local_fitness, p.local_design = fit, design
        if g_pos is None or _key(fit, design) > _key(g_fit, g_design):
            g_pos, g_fit, g_design = p.position.copy(), fit, design
    trace = [g_fit]
    rows = [_trace_row(0, g_fit, g_design)]
    stall = 0
    for it in range(1, params.iterations + 1):
        results = []
        for p in swarm:
            r1, r2 = rng.random(), rng.random()
            p.velocity = (params.inertia * p.velocity + params.c1 * r1 * (p.local_best - p.position)
                          + params.c2 * r2 * (g_pos - p.position))
            p.position = np.clip(p.position + p.velocity, lo, hi)
            results.append(evaluate(p.position))
        new_pos, new_fit, new_design = g_pos, g_fit, g_design
        for p, (fit, design) in zip(swarm, results):
            if _key(fit, design) > _key(p.local_fitness, p.local_design):
                p.local_best, p.local_fitness, p.local_design = p.position.copy(), fit, design
            if _key(fit, design) > _key(new_fit, new_design):
                new_pos, new_fit, new_design = p.position.copy(), fit, design
        improved = _key(new_fit, new_design) > _key(g_fit, g_design)
        g_pos, g_fit, g_design = new_pos, new_fit, new_design
        trace.append(g_fit)
        rows.append(_trace_row(it, g_fit, g_design))
        stall = 0 if improved else stall + 1
        if stall >= params.stall_limit:
            break
    if g_design is None:
        raise InfeasibleDesignError("no feasible hybrid design found in the search box")
    g_design.search_trace = trace
    g_design.trace_rows = rows
    g_design.search_time = time.perf_counter() - start
    return g_design


def _trace_row(iteration, fitness, design):
    if design is None:
        return (iteration, fitness, 0, 0)
    return (iteration, fitness, design.rav.sp, design.rav.batch)

