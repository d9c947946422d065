"""Layer-pipelined accelerator (one dedicated stage per layer).

Latency follows the per-stage loop nest with ceiling division so that
parallelism which does not divide the channel counts is charged for the
idle lanes. Buffers are costed with an 18Kb block model of 36 bits x 512
entries; anything wider or deeper tiles across blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .errors import InfeasibleDesignError
from .network import POOL
from .profiler import layer_ops

BRAM_WIDTH = 36
BRAM_DEPTH = 512
BRAM_BITS = BRAM_WIDTH * BRAM_DEPTH


def pow2_floor(x):
    """Largest power of two <= x, never below 1."""
    if x < 2:
        return 1
    return 1 << (int(x).bit_length() - 1)


def pow2_ceil(x):
    if x <= 1:
        return 1
    return 1 << (math.ceil(x) - 1).bit_length()


def is_pow2(x):
    return isinstance(x, int) and x >= 1 and x & (x - 1) == 0


def bram_cost(width, depth):
    """18Kb blocks needed for a ``width``-bit, ``depth``-entry memory."""
    if width <= 0 or depth <= 0:
        return 0
    return -(-width // BRAM_WIDTH) * -(-depth // BRAM_DEPTH)


def layer_alpha(platform, layer):
    return platform.alpha(max(layer.dw, layer.ww))


def dsp_for(pf, alpha):
    return -(-pf * 2 // alpha)


@dataclass(frozen=True)
class ResourceUsage:
    dsp: int = 0
    bram: int = 0
    bw: float = 0.0
    lut: int = 0

    def __add__(self, other):
        return ResourceUsage(self.dsp + other.dsp, self.bram + other.bram,
                             self.bw + other.bw, self.lut + other.lut)

    def replicate(self, copies):
        """Resources of ``copies`` parallel instances sharing one weight stream."""
        return ResourceUsage(self.dsp * copies, self.bram * copies, self.bw, self.lut * copies)

    def fits(self, platform, bw_slack=1e-9):
        return (self.dsp <= platform.dsp_total and self.bram <= platform.bram_total
                and self.lut <= platform.lut_total
                and self.bw <= platform.bw_total * (1 + bw_slack))

    def as_dict(self):
        return {"dsp": self.dsp, "bram": self.bram, "bw": self.bw, "lut": self.lut}


@dataclass
class PipelineStageConfig:
    layer_index: int
    kind: str
    cpf: int
    kpf: int
    col: int = 1
    width_rd: int = 0
    depth_rd: int = 0
    width_wr: int = 0
    bw_alloc: float = 0.0

    @property
    def pf(self):
        return 0 if self.kind == POOL else self.cpf * self.kpf


@dataclass
class PipelineDesign:
    stages: list
    batch: int
    cycles: list
    latencies: list
    frames_per_sec: float
    throughput_gops: float
    covered_ops: int
    resources: ResourceUsage
    bandwidth_bound: bool = False
    bw_scale: float = 1.0
    warnings: list = field(default_factory=list)

    @property
    def max_latency(self):
        return max(self.latencies)

    @property
    def pfs(self):
        return [s.pf for s in self.stages if s.kind != POOL]


def split_pf(pf, ch_in, ch_out):
    """Balanced (CPF, KPF) split of a power-of-two parallelism, clamped to the channel counts."""
    cpf = min(pow2_floor(math.isqrt(pf)), pow2_floor(ch_in))
    kpf = min(pf // cpf, pow2_floor(ch_out))
    cpf = min(pf // kpf, pow2_floor(ch_in))
    return cpf, kpf


def stage_cycles(layer, cpf, kpf):
    if cpf < 1 or kpf < 1:
        raise ValueError("parallelism factors must be >= 1")
    spatial = layer.h_out * layer.w_out * layer.r * layer.s
    if layer.kind == POOL:
        return spatial * -(-layer.ch_in // cpf)
    return -(-layer.ch_in // cpf) * -(-layer.ch_out // kpf) * spatial


def stage_latency(layer, cpf, kpf, freq):
    """(cycles, seconds) for one frame through a stage."""
    cycles = stage_cycles(layer, cpf, kpf)
    return cycles, cycles / freq


def column_depth(layer, cpf):
    """Input-buffer entries per extra cached column."""
    return -(-layer.h_in * layer.ch_in * layer.stride // cpf)


def successor_depth(layer, next_cpf):
    return -(-layer.h_out * layer.ch_out // next_cpf)


def initial_input_depth(layer, cpf):
    # S columns for the window plus one stride of columns being refilled
    return -(-layer.h_in * layer.ch_in * (layer.s + layer.stride) // cpf)


def weight_buffer_blocks(stage, layer):
    if layer.kind == POOL:
        return 0
    depth = layer.r * layer.s * -(-layer.ch_in // stage.cpf)
    return 2 * -(-stage.cpf * stage.kpf * layer.ww // BRAM_WIDTH) * -(-depth // BRAM_DEPTH)


def input_buffer_blocks(stage):
    return bram_cost(stage.width_rd, stage.depth_rd)


def stage_resources(stage, layer, alpha):
    dsp = 0 if layer.kind == POOL else dsp_for(stage.cpf * stage.kpf, alpha)
    bram = input_buffer_blocks(stage) + weight_buffer_blocks(stage, layer)
    return ResourceUsage(dsp=dsp, bram=bram, bw=stage.bw_alloc, lut=0)


def make_stages(layers, pfs):
    """Stage configs for ``layers`` given one PF per compute layer (POOL stages inherit the CPF before them)."""
    stages = []
    it = iter(pfs)
    prev_cpf = None
    prev_width = None
    for layer in layers:
        if layer.kind == POOL:
            cpf = min(prev_cpf or 16, pow2_floor(layer.ch_in))
            kpf = 1
        else:
            cpf, kpf = split_pf(next(it), layer.ch_in, layer.ch_out)
        width_rd = cpf * layer.dw
        stages.append(PipelineStageConfig(
            layer_index=layer.index, kind=layer.kind, cpf=cpf, kpf=kpf, col=1,
            width_rd=width_rd, depth_rd=initial_input_depth(layer, cpf),
            width_wr=prev_width if prev_width is not None else width_rd))
        prev_cpf = cpf
        prev_width = (cpf if layer.kind == POOL else kpf) * layer.dw
    return stages


def weight_bw_demand(stage, layer, freq):
    """Weight-stream bandwidth (bits/s) with Col cached columns; BW_R = WW * FREQ per lane."""
    if layer.kind == POOL:
        return 0.0
    return stage.cpf * stage.kpf * layer.ww * freq / (layer.h_out * stage.col)


def allocate_bandwidth(stages, layers, bw_total, mem_total, freq):
    """Column-cache growth until the weight streams fit ``bw_total``.

    Returns ``(stages, bws, bandwidth_bound)``. ``stages`` are fresh copies
    with grown ``col``/``depth_rd``; ``bws`` the per-stage demand after
    caching. The loop stops when demand fits, when the input buffers would
    exceed ``mem_total`` blocks, or when no CONV stage can cache more columns.
    """
    stages = [replace(s) for s in stages]
    n = len(stages)
    bws = [weight_bw_demand(s, l, freq) for s, l in zip(stages, layers)]
    costs = [input_buffer_blocks(s) for s in stages]
    mem_used = sum(costs)
    total = sum(bws)
    while total > bw_total:
        best = -1
        for i in range(n):
            if layers[i].kind == "CONV" and stages[i].col < layers[i].w_in and (best < 0 or bws[i] > bws[best]):
                best = i
        if best < 0:
            break
        i = best
        grow_i = column_depth(layers[i], stages[i].cpf)
        stages[i].depth_rd += grow_i
        nxt = i + 1 if i + 1 < n else None
        if nxt is not None:
            grow_n = successor_depth(layers[i], stages[nxt].cpf)
            stages[nxt].depth_rd += grow_n
        new_i = input_buffer_blocks(stages[i])
        new_n = input_buffer_blocks(stages[nxt]) if nxt is not None else 0
        old_n = costs[nxt] if nxt is not None else 0
        candidate = mem_used - costs[i] - old_n + new_i + new_n
        if candidate <= mem_total:
            stages[i].col += 1
            mem_used = candidate
            costs[i] = new_i
            if nxt is not None:
                costs[nxt] = new_n
            old_bw = bws[i]
            bws[i] = weight_bw_demand(stages[i], layers[i], freq)
            total += bws[i] - old_bw
        else:
            stages[i].depth_rd -= grow_i
            if nxt is not None:
                stages[nxt].depth_rd -= grow_n
            break
    total = sum(bws)
    return stages, bws, total > bw_total


def evaluate_pipeline(layers, pfs, platform, batch=1, bw_budget=None, bram_budget=None):
    """Build stage configs for ``pfs`` and evaluate latency and resources of one pipeline copy.

    The weight streams share ``bw_budget``; when column caching cannot bring
    demand under it every stage is slowed by the same oversubscription factor
    and the design is flagged bandwidth-bound.
    """
    freq = platform.freq
    bw_budget = platform.bw_total if bw_budget is None else bw_budget
    bram_budget = platform.bram_total // batch if bram_budget is None else bram_budget
    stages = make_stages(layers, pfs)
    weight_blocks = sum(weight_buffer_blocks(s, l) for s, l in zip(stages, layers))
    stages, bws, bound = allocate_bandwidth(stages, layers, bw_budget, bram_budget - weight_blocks, freq)
    demand = sum(bws)
    scale = demand / bw_budget if bound else 1.0
    dsp = bram = 0
    cycles = []
    for stage, layer, bw in zip(stages, layers, bws):
        stage.bw_alloc = bw / scale
        res = stage_resources(stage, layer, layer_alpha(platform, layer))
        dsp += res.dsp
        bram += res.bram
        cycles.append(stage_cycles(layer, stage.cpf, stage.kpf))
    latencies = [c / freq * scale for c in cycles]
    covered = sum(layer_ops(layer) for layer in layers)
    fps = batch / max(latencies)
    single = ResourceUsage(dsp=dsp, bram=bram, bw=demand / scale, lut=0)
    return PipelineDesign(stages=stages, batch=batch, cycles=cycles, latencies=latencies,
                          frames_per_sec=fps, throughput_gops=fps * covered / 1e9, covered_ops=covered,
                          resources=single.replicate(batch), bandwidth_bound=bound, bw_scale=scale)


def pipeline_throughput(design, covered_gop):
    """(frames/s, GOP/s) of a pipeline: Batch / max stage latency."""
    if not design.latencies:
        raise ValueError("pipeline design has no stages")
    fps = design.batch / max(design.latencies)
    return fps, fps * covered_gop


def allocate_compute(demands, r_total, literal_double=False):
    """Greedy power-of-two parallelism allocation proportional to demand.

    ``literal_double`` reproduces the double-counting guard
    ``sum(R) + 2*R_j <= R_total``; the default charges a doubling its true
    cost ``R_j``.
    """
    n = len(demands)
    if n == 0:
        return []
    if r_total < n:
        raise InfeasibleDesignError(f"parallelism budget {r_total} is smaller than the {n} layers to place")
    fr = [Fraction(d) for d in demands]
    total = sum(fr)
    alloc = [pow2_floor(d * r_total / total) if total > 0 else 1 for d in fr]
    while sum(alloc) > r_total:
        j = max(range(n), key=lambda i: alloc[i])
        alloc[j] //= 2
    while sum(alloc) <= r_total:
        j = max(range(n), key=lambda i: fr[i] / alloc[i])
        extra = 2 * alloc[j] if literal_double else alloc[j]
        if sum(alloc) + extra <= r_total:
            alloc[j] *= 2
        else:
            break
    return alloc


def padded_demand(layer):
    """MAC count with channel dims rounded up to powers of two (what pow2 parallelism actually pays for)."""
    return layer.h_out * layer.w_out * layer.r * layer.s * pow2_ceil(layer.ch_in) * pow2_ceil(layer.ch_out)


def bottleneck_topup(layers, pfs, platform, batch, fits, bw_budget=None, bram_budget=None, design=None):
    """Double the bottleneck stages' PFs while the result fits and the slowest stage gets faster.

    Stages tied at the maximum latency are doubled together, otherwise a
    single doubling could never lower the maximum.
    """
    pfs = list(pfs)
    compute_pos = [i for i, l in enumerate(layers) if l.kind != POOL]
    if not compute_pos:
        return pfs, design
    owner = {}
    last = None
    for i, layer in enumerate(layers):
        if layer.kind != POOL:
            last = compute_pos.index(i)
        owner[i] = last if last is not None else 0
    if design is None:
        design = evaluate_pipeline(layers, pfs, platform, batch, bw_budget, bram_budget)
    while True:
        worst = design.max_latency
        owners = sorted({owner[i] for i, lat in enumerate(design.latencies) if lat >= worst * (1 - 1e-12)})
        trial = list(pfs)
        stuck = False
        for j in owners:
            trial[j] *= 2
            layer = layers[compute_pos[j]]
            if split_pf(trial[j], layer.ch_in, layer.ch_out) == split_pf(pfs[j], layer.ch_in, layer.ch_out):
                stuck = True
        if stuck:
            break
        candidate = evaluate_pipeline(layers, trial, platform, batch, bw_budget, bram_budget)
        if not fits(candidate) or candidate.max_latency >= design.max_latency:
            break
        pfs, design = trial, candidate
    return pfs, design


def optimize_pipeline(net, platform, batch=1, literal_double=False, layers=None):
    """Paradigm-1 design for ``net``: compute allocation, bottleneck top-up, column caching.

    The parallelism budget shrinks in 10% steps until the buffers of
    ``batch`` replicated copies fit the BRAM budget.
    """
    layers = list(net.layers if layers is None else layers)
    compute = [l for l in layers if l.kind != POOL]
    if not compute:
        raise InfeasibleDesignError("pipeline needs at least one CONV or FC layer")
    alpha = min(layer_alpha(platform, l) for l in compute)
    r_total = platform.dsp_total * alpha // 2 // batch
    demands = [padded_demand(l) for l in compute]

    def fits(d):
        return d.resources.dsp <= platform.dsp_total and d.resources.bram <= platform.bram_total

    while r_total >= len(compute):
        pfs = allocate_compute(demands, r_total, literal_double)
        design = evaluate_pipeline(layers, pfs, platform, batch)
        if fits(design):
            pfs, design = bottleneck_topup(layers, pfs, platform, batch, fits, design=design)
            if design.bandwidth_bound:
                design.warnings.append("bandwidth-bound: weight streams exceed the external bandwidth")
            return design
        r_total = r_total * 9 // 10
    raise InfeasibleDesignError(
        f"no pipeline for {len(layers)} layers fits {platform.dsp_total} DSP / {platform.bram_total} BRAM"
        f" at batch {batch}")
