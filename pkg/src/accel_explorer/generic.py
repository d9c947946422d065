"""Reusable MAC-array accelerator: latency/resource model and 3-step DSE.

Buffer capacities are carved out of a BRAM budget by strategy:

* ``A``: feature-map 75% / accumulation 25% of the BRAM; weights live in
  LUT-RAM (64 entries deep, charged at 64 bits per LUT).
* ``B``: weights 50% / feature-map 37.5% / accumulation 12.5%, all BRAM.

A buffer of capacity C occupies ``C / (18432 * 0.5)`` blocks (ping-pong
halves), and never fewer than two banks of ``ceil(width / 36)`` blocks.
External bandwidth is split per layer in proportion to that layer's
weight / ifm / ofm traffic (group re-fetches included), so each memory
term of a schedule equals total traffic over total bandwidth.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import InfeasibleDesignError
from .network import POOL
from .pipeline import BRAM_BITS, BRAM_WIDTH, ResourceUsage, dsp_for, layer_alpha
from .profiler import layer_traffic

IS = "IS"
WS = "WS"
STRATEGIES = ("A", "B")
STRATEGY_SHARES = {  # (weights, fmap, accum) in eighths of the BRAM budget
    "A": (0, 6, 2),
    "B": (4, 3, 1),
}
LUTRAM_DEPTH = 64
LUT_BITS = 64
# fabric per MAC unit of a reusable array (operand routing, adder tree, accumulator addressing);
# calibrated so the KU115 sample tops out at a 1024-MAC array
MAC_LUTS = 400
HALF_BLOCK = BRAM_BITS // 2


@dataclass(frozen=True)
class GenericConfig:
    cpf: int
    kpf: int
    strategy: str
    cap_abuff: int
    cap_wbuff: int
    cap_fbuff: int
    bw_total: float
    batch: int = 1
    dw: int = 16
    ww: int = 16
    per_layer_dataflow: tuple = ()
    bw_splits: tuple = ()

    @property
    def pf(self):
        return self.cpf * self.kpf


@dataclass(frozen=True)
class GenericLayerSchedule:
    layer_index: int
    dataflow: str
    g_fm: int
    g_w: int
    l_comp: float
    l_w: float
    l_ifm: float
    l_ofm: float
    l_total: float
    bw_split: tuple = (0.0, 0.0, 0.0)


@dataclass
class GenericDesign:
    config: GenericConfig
    schedules: list
    total_latency: float
    resources: ResourceUsage
    warnings: list = field(default_factory=list)

    @property
    def dataflows(self):
        return [s.dataflow for s in self.schedules]


def split_pf_g(pf):
    """Balanced array shape for a power-of-two MAC count; CPF gets the extra factor."""
    log = pf.bit_length() - 1
    cpf = 1 << ((log + 1) // 2)
    return cpf, pf // cpf


def array_sequence(limit=1 << 16):
    """(1,1), (2,1), (2,2), (4,2), ... up to ``limit`` MACs."""
    pf = 1
    while pf <= limit:
        yield split_pf_g(pf)
        pf *= 2


def gen_compute_cycles(layer, cpf, kpf):
    spatial = layer.h_out * layer.w_out * layer.r * layer.s
    if layer.kind == POOL:
        # the pooling unit sits behind the accumulation buffer and handles KPF channels per cycle
        return spatial * -(-layer.ch_in // kpf)
    return -(-layer.ch_in // cpf) * -(-layer.ch_out // kpf) * spatial


def gen_compute_latency(layer, cpf, kpf, freq):
    return gen_compute_cycles(layer, cpf, kpf) / freq


def gen_memory_latencies(layer, bw_split):
    """(L_w, L_ifm, L_ofm) for one pass over each tensor."""
    out = []
    for bits, bw in zip(layer_traffic(layer), bw_split):
        if bits == 0:
            out.append(0.0)
        elif bw <= 0:
            raise ValueError(f"layer {layer.index}: {bits} bits of traffic but no bandwidth allotted")
        else:
            out.append(bits / bw)
    return tuple(out)


def group_counts(layer, config):
    w_bits, _, o_bits = layer_traffic(layer)
    g_fm = max(1, -(-2 * o_bits // config.cap_abuff)) if config.cap_abuff > 0 else max(1, o_bits)
    g_w = max(1, -(-2 * w_bits // config.cap_wbuff)) if config.cap_wbuff > 0 else max(1, w_bits)
    return g_fm, g_w


def _dataflow_latency(layer, config, dataflow, traffic, groups, l_comp):
    w_bits, i_bits, o_bits = traffic
    g_fm, g_w = groups
    b = config.batch
    if dataflow == IS:
        moved = (w_bits * g_fm * b, i_bits * b, o_bits * b)
    else:
        # weights stay resident for the whole batch, feature maps stream once per weight group
        moved = (w_bits, i_bits * g_w * b, o_bits * g_w * b)
    total = sum(moved)
    bw = config.bw_total
    split = tuple(bw * m / total for m in moved) if total else (0.0, 0.0, 0.0)
    l_w, l_ifm, l_ofm = gen_memory_latencies(layer, split)
    if dataflow == IS:
        l_total = max(b * l_comp, l_w * g_fm * b, l_ifm * b, l_ofm * b)
    else:
        l_total = max(b * l_comp, l_w, l_ifm * g_w * b, l_ofm * g_w * b)
    return l_total, split, (l_w, l_ifm, l_ofm)


def allowed_dataflows(strategy):
    return (IS,) if strategy == "A" else (IS, WS)


def schedule_layer(layer, config, freq):
    """Best-dataflow schedule of one layer; latencies are for ``config.batch`` frames."""
    traffic = layer_traffic(layer)
    groups = group_counts(layer, config)
    l_comp = gen_compute_latency(layer, config.cpf, config.kpf, freq)
    best = None
    for df in allowed_dataflows(config.strategy):
        l_total, split, mem = _dataflow_latency(layer, config, df, traffic, groups, l_comp)
        if best is None or l_total < best[1]:
            best = (df, l_total, split, mem)
    df, l_total, split, (l_w, l_ifm, l_ofm) = best
    return GenericLayerSchedule(layer.index, df, groups[0], groups[1], l_comp, l_w, l_ifm, l_ofm, l_total, split)


def dataflow_latency(layer, config, freq, dataflow):
    """Latency of ``layer`` under a forced dataflow (used by the exhaustive checks)."""
    l_comp = gen_compute_latency(layer, config.cpf, config.kpf, freq)
    return _dataflow_latency(layer, config, dataflow, layer_traffic(layer), group_counts(layer, config), l_comp)[0]


def buffer_blocks(capacity, width):
    if capacity <= 0:
        return 0
    return max(-(-capacity // HALF_BLOCK), 2 * -(-width // BRAM_WIDTH))


def make_config(cpf, kpf, strategy, bram_budget, bw_total, batch=1, dw=16, ww=16):
    """Size the three buffers from ``bram_budget`` blocks under ``strategy``."""
    w_share, f_share, a_share = STRATEGY_SHARES[strategy]
    budget = max(bram_budget, 0)
    # whole blocks per buffer, rounded down so the shares never overrun the budget
    cap_a = budget * a_share // 8 * HALF_BLOCK
    cap_f = budget * f_share // 8 * HALF_BLOCK
    cap_w = budget * w_share // 8 * HALF_BLOCK if strategy == "B" else cpf * kpf * ww * LUTRAM_DEPTH
    return GenericConfig(cpf=cpf, kpf=kpf, strategy=strategy, cap_abuff=cap_a, cap_wbuff=cap_w,
                         cap_fbuff=cap_f, bw_total=bw_total, batch=batch, dw=dw, ww=ww)


def gen_resources(config, alpha):
    dsp = dsp_for(config.pf, alpha)
    bram = buffer_blocks(config.cap_fbuff, config.cpf * config.dw) + \
        buffer_blocks(config.cap_abuff, config.kpf * config.dw)
    lut = config.pf * MAC_LUTS
    if config.strategy == "B":
        bram += buffer_blocks(config.cap_wbuff, config.pf * config.ww)
    else:
        lut += -(-config.cap_wbuff // LUT_BITS)
    return ResourceUsage(dsp=dsp, bram=bram, bw=config.bw_total, lut=lut)


@dataclass(frozen=True)
class GenericBudget:
    dsp: int
    bram: int
    lut: int
    bw: float
    freq: float

    @classmethod
    def of(cls, platform):
        return cls(platform.dsp_total, platform.bram_total, platform.lut_total, platform.bw_total, platform.freq)


def _fits(res, budget):
    return res.dsp <= budget.dsp and res.bram <= budget.bram and res.lut <= budget.lut


def network_bits(layers):
    return max(l.dw for l in layers), max(l.ww for l in layers)


def evaluate_generic(layers, config, freq):
    schedules = [schedule_layer(layer, config, freq) for layer in layers]
    return schedules, sum(s.l_total for s in schedules)


def finalize(config, schedules, total, alpha):
    config = replace(config, per_layer_dataflow=tuple(s.dataflow for s in schedules),
                     bw_splits=tuple(s.bw_split for s in schedules))
    return GenericDesign(config, schedules, total, gen_resources(config, alpha))


def feasible_arrays(budget, strategy, alpha, batch=1, dw=16, ww=16):
    """STEP 1: array shapes in doubling order while the resource model fits the budget."""
    found = []
    for cpf, kpf in array_sequence():
        config = make_config(cpf, kpf, strategy, budget.bram, budget.bw, batch, dw, ww)
        if not _fits(gen_resources(config, alpha), budget):
            break
        found.append(config)
    return found


def gen_dse(layers, budget, alpha=2, batch=1):
    """Exhaustive over feasible arrays and both buffer strategies; argmin total latency.

    Ties go to fewer DSPs, then strategy A, then the earlier array.
    """
    if not isinstance(budget, GenericBudget):
        platform = budget
        alpha = min(layer_alpha(platform, l) for l in layers)
        budget = GenericBudget.of(platform)
    layers = list(layers)
    dw, ww = network_bits(layers)
    best = None
    for strategy in STRATEGIES:
        for config in feasible_arrays(budget, strategy, alpha, batch, dw, ww):
            schedules, total = evaluate_generic(layers, config, budget.freq)
            key = (total, dsp_for(config.pf, alpha))
            if best is None or key < best[0]:
                best = (key, config, schedules, total)
    if best is None:
        raise InfeasibleDesignError("no MAC array fits the generic-structure budget")
    _, config, schedules, total = best
    return finalize(config, schedules, total, alpha)


def generic_throughput(design, total_ops):
    fps = design.config.batch / design.total_latency
    return fps, fps * total_ops / 1e9
