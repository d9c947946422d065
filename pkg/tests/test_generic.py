from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from accel_explorer import zoo
from accel_explorer.errors import InfeasibleDesignError
from accel_explorer.generic import (IS, WS, GenericBudget, GenericConfig, dataflow_latency, gen_compute_cycles,
                                    gen_compute_latency, gen_dse, gen_memory_latencies, gen_resources,
                                    make_config, schedule_layer)
from accel_explorer.network import network_from_dict
from accel_explorer.pipeline import is_pow2
from accel_explorer.profiler import layer_traffic
from oracles import loop_nest_cycles
from randnets import random_network, random_platform


def layer_of(kind, shape, **kw):
    return network_from_dict({"name": "t", "input_shape": list(shape), "layers": [{"kind": kind, **kw}]}).layers[0]


def config(cpf=16, kpf=16, strategy="B", cap_a=1 << 30, cap_w=1 << 30, cap_f=1 << 30, bw=1e10, batch=1):
    return GenericConfig(cpf=cpf, kpf=kpf, strategy=strategy, cap_abuff=cap_a, cap_wbuff=cap_w, cap_fbuff=cap_f,
                         bw_total=bw, batch=batch)


def test_compute_latency_112():
    layer = layer_of("CONV", (128, 112, 112), ch_out=256, kernel=3)
    cycles = gen_compute_cycles(layer, 16, 16)
    # the loop nest is identical at every output pixel, so walk one pixel and scale
    assert cycles == loop_nest_cycles(1, 1, 3, 3, 128, 256, 16, 16) * 112 * 112 == 14_450_688
    assert gen_compute_latency(layer, 16, 16, 2e8) == pytest.approx(72.25e-3, rel=1e-4)


def test_compute_latency_unit_and_padding_waste():
    assert gen_compute_latency(layer_of("CONV", (1, 1, 1), ch_out=1, kernel=1), 1, 1, 1.0) == 1.0
    layer = layer_of("CONV", (3, 8, 8), ch_out=16, kernel=3)
    real = 8 * 8 * 9 * (3 / 16) * 1
    assert gen_compute_cycles(layer, 16, 16) == 8 * 8 * 9
    assert gen_compute_cycles(layer, 16, 16) / real == pytest.approx(16 / 3)


def test_memory_latencies():
    conv = layer_of("CONV", (128, 112, 112), ch_out=256, kernel=3)
    w, i, o = layer_traffic(conv)
    assert w == 4_718_592 and i == 25_690_112
    l_w, l_ifm, _ = gen_memory_latencies(conv, (1e9, 2e9, 1e9))
    assert l_w == pytest.approx(4.719e-3, rel=1e-3)
    assert l_ifm == pytest.approx(12.85e-3, rel=1e-3)
    pool = layer_of("POOL", (64, 8, 8), kernel=2, stride=2)
    assert gen_memory_latencies(pool, (0.0, 1e9, 1e9))[0] == 0.0
    with pytest.raises(ValueError):
        gen_memory_latencies(conv, (0.0, 1e9, 1e9))


def test_fmap_group_count():
    layer = layer_of("CONV", (64, 112, 112), ch_out=128, kernel=3)
    assert layer_traffic(layer)[2] == 25_690_112
    sched = schedule_layer(layer, config(cap_a=8_388_608), 2e8)
    assert sched.g_fm == 7


def test_single_group_dataflows_coincide():
    layer = layer_of("CONV", (16, 8, 8), ch_out=16, kernel=3)
    cfg = config()
    assert dataflow_latency(layer, cfg, 2e8, IS) == dataflow_latency(layer, cfg, 2e8, WS)


def test_weight_heavy_fc_prefers_ws():
    fc = layer_of("FC", (4096, 1, 1), ch_out=1000)
    o_bits = layer_traffic(fc)[2]
    cfg = config(cap_a=o_bits // 2, bw=1e9)
    sched = schedule_layer(fc, cfg, 2e8)
    assert (sched.g_fm, sched.g_w) == (4, 1)
    assert sched.dataflow == WS
    assert sched.l_total < dataflow_latency(fc, cfg, 2e8, IS)
    # strategy A cannot keep weights stationary
    assert schedule_layer(fc, replace(cfg, strategy="A"), 2e8).dataflow == IS


def test_resources():
    assert gen_resources(config(strategy="B", cap_w=0, cap_a=0, cap_f=0), 2).dsp == 256
    res_b = gen_resources(config(strategy="B", cap_w=9_437_184, cap_a=0, cap_f=0), 2)
    assert res_b.bram == 1024
    res_a = gen_resources(config(strategy="A", cap_w=9_437_184, cap_a=0, cap_f=0), 2)
    assert res_a.bram == 0 and res_a.lut > 0


def test_compute_bound_net_takes_larger_array():
    net = zoo.vgg16_conv(32)
    budget = GenericBudget(dsp=128, bram=4000, lut=10**9, bw=1e13, freq=2e8)
    design = gen_dse(list(net.layers), budget)
    assert (design.config.cpf, design.config.kpf) == (16, 8)


def test_unit_layer_tie_breaks_to_fewest_dsp():
    layer = layer_of("CONV", (1, 1, 1), ch_out=1, kernel=1)
    design = gen_dse([layer], GenericBudget(dsp=64, bram=1000, lut=10**9, bw=1e12, freq=2e8))
    assert (design.config.cpf, design.config.kpf) == (1, 1)


def test_no_array_fits():
    with pytest.raises(InfeasibleDesignError):
        gen_dse(list(zoo.vgg16_conv(32).layers), GenericBudget(dsp=0, bram=10, lut=10**6, bw=1e9, freq=2e8))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["A", "B"]), st.integers(0, 5), st.integers(1, 4))
def test_schedule_properties(seed, strategy, log_pf, batch):
    rng = np.random.default_rng(seed)
    net = random_network(rng)
    bram = int(rng.integers(8, 2000))
    pf = 1 << log_pf
    cpf, kpf = (pf, 1) if log_pf % 2 else (int(pf ** 0.5), int(pf ** 0.5))
    cfg = make_config(cpf, kpf, strategy, bram, float(rng.uniform(1e9, 1e11)), batch)
    for layer in net.layers:
        sched = schedule_layer(layer, cfg, 2e8)
        assert sched.g_fm >= 1 and sched.g_w >= 1
        flows = (IS,) if strategy == "A" else (IS, WS)
        assert sched.l_total == min(dataflow_latency(layer, cfg, 2e8, f) for f in flows)
        bigger = replace(cfg, cap_abuff=2 * cfg.cap_abuff + 1, cap_wbuff=2 * cfg.cap_wbuff + 1)
        assert dataflow_latency(layer, bigger, 2e8, IS) <= dataflow_latency(layer, cfg, 2e8, IS)
        assert dataflow_latency(layer, bigger, 2e8, WS) <= dataflow_latency(layer, cfg, 2e8, WS)
        if sched.g_fm == 1:
            assert dataflow_latency(layer, bigger, 2e8, IS) == dataflow_latency(layer, cfg, 2e8, IS)
        assert sum(sched.bw_split) == pytest.approx(cfg.bw_total, rel=1e-9) or sum(layer_traffic(layer)) == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gen_dse_within_budget(seed):
    rng = np.random.default_rng(seed)
    net, plat = random_network(rng), random_platform(rng)
    try:
        design = gen_dse(list(net.layers), plat)
    except InfeasibleDesignError:
        return
    res = design.resources
    assert res.dsp <= plat.dsp_total and res.bram <= plat.bram_total and res.lut <= plat.lut_total
    assert is_pow2(design.config.cpf) and is_pow2(design.config.kpf)
    assert design.total_latency == pytest.approx(sum(s.l_total for s in design.schedules), rel=1e-12)
