import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from accel_explorer import hybrid, zoo
from accel_explorer.errors import ValidationError
from accel_explorer.generic import gen_resources
from accel_explorer.hybrid import (FRACTION_HI, FRACTION_LO, RAV, PsoParams, batch_capacity, ctc_parallelism,
                                   decode, fitness_score, local_optimize_generic, local_optimize_pipeline,
                                   pso_search)
from accel_explorer.network import network_from_dict, platform_from_dict
from accel_explorer.pipeline import evaluate_pipeline, is_pow2
from accel_explorer.profiler import LayerWorkload, WorkloadProfile, profile_network


def platform(dsp=5520, bram=4320, lut=663360, bw=1.536e11, freq=2e8):
    return platform_from_dict({"name": "p", "dsp_total": dsp, "bram18k_total": bram, "lut_total": lut,
                               "bw_bits_per_sec": bw, "freq_hz": freq})


def net(layers, shape=(8, 16, 16)):
    return network_from_dict({"name": "h", "input_shape": list(shape), "layers": layers})


def test_equal_layers_get_equal_pf():
    twin = net([{"kind": "CONV", "ch_out": 8, "kernel": 3}] * 3)
    prof = profile_network(twin)
    first, second = prof.per_layer[:2]
    assert (first.ops, first.ctc) == (second.ops, second.ctc)
    pfs, _ = local_optimize_pipeline(RAV(2, 1, 0.9, 0.9, 0.5), list(twin.layers), prof, platform())
    assert pfs[0] == pfs[1]


def test_ctc_sizing_then_one_halving():
    n = net([{"kind": "CONV", "ch_out": 16, "kernel": 3}, {"kind": "CONV", "ch_out": 16, "kernel": 3}, {"kind": "CONV", "ch_out": 8, "kernel": 1}], (16, 16, 16))
    # two layers with OP = 2e9 and 1e9 and equal CTC (traffic proportional to work)
    prof = WorkloadProfile((LayerWorkload(1, "CONV", 2_000_000_000, 8000, 0, 0),
                            LayerWorkload(2, "CONV", 1_000_000_000, 4000, 0, 0),
                            LayerWorkload(3, "CONV", 1, 8, 8, 8)))
    freq = 2e8
    norm_bytes = (8000 + 4000) / 8
    bw_bits = 8 * 8 * norm_bytes * freq / 2e9  # makes the first PF exactly 8
    plat = platform(dsp=10, bram=4000, bw=10 * bw_bits, freq=freq)
    assert ctc_parallelism(prof, 2, bw_bits, freq) == [8, 4]
    rav = RAV(2, 1, 0.6, 0.9, 0.1)  # six DSPs, i.e. six 16-bit MAC units
    pfs, design = local_optimize_pipeline(rav, list(n.layers), prof, plat)
    assert pfs == [4, 2]
    assert design.resources.dsp <= 6


def _two_part(tail_channels=1):
    return net([{"kind": "CONV", "ch_out": 64, "kernel": 3}, {"kind": "CONV", "ch_out": 64, "kernel": 3},
                {"kind": "POOL", "kernel": 16, "stride": 16}, {"kind": "FC", "ch_out": tail_channels}], (64, 16, 16))


def test_fast_generic_needs_no_growth_or_rollback():
    n = _two_part()
    plat = platform()
    rav = RAV(3, 1, 0.5, 0.5, 0.5)
    prof = profile_network(n)
    pfs, pipe = local_optimize_pipeline(rav, list(n.layers), prof, plat)
    plan = local_optimize_generic(rav, list(n.layers), pfs, pipe, plat)
    assert plan.design.config.pf == 1
    assert plan.pfs == pfs


def test_slow_generic_grows_by_doubling():
    layers = [{"kind": "CONV", "ch_out": 4, "kernel": 1}, {"kind": "CONV", "ch_out": 4, "kernel": 1}]
    n = net(layers, (4, 8, 8))
    plat = platform(bw=1e15)
    rav = RAV(1, 1, 0.5, 0.5, 0.5)
    prof = profile_network(n)
    # pipeline stage at PF 4 against a generic tail that starts 4x slower at PF 1
    pipe = evaluate_pipeline(list(n.layers)[:1], [4], plat, 1, plat.bw_total / 2, plat.bram_total // 2)
    plan = local_optimize_generic(rav, list(n.layers), [4], pipe, plat)
    assert plan.design.config.pf == 4
    assert plan.pfs == [4]
    assert plan.design.total_latency <= pipe.max_latency


def test_rollback_until_batch_fits():
    n = zoo.vgg16_conv(32)
    plat = zoo.ku115()
    prof = profile_network(n)
    rav = RAV(6, 8, 0.95, 0.95, 0.5)
    pfs, pipe = local_optimize_pipeline(rav, list(n.layers), prof, plat)
    plan = local_optimize_generic(rav, list(n.layers), pfs, pipe, plat)
    assert plan is not None
    assert all(a <= b for a, b in zip(plan.pfs, pfs))
    assert plan.pfs != pfs
    assert rav.batch <= batch_capacity(plat, plan.design.resources, plan.pipe.resources)


def test_rollback_terminates_on_adversarial_budget():
    n = zoo.vgg16_conv(224)
    tiny = platform(dsp=40, bram=60, lut=20000, bw=1e9)
    prof = profile_network(n)
    rav = RAV(12, 32, 0.95, 0.95, 0.95)
    pfs, pipe = local_optimize_pipeline(rav, list(n.layers), prof, tiny)
    assert local_optimize_generic(rav, list(n.layers), pfs, pipe, tiny) is None
    assert fitness_score(rav, n, tiny, prof) == (0.0, None)


def test_long_prefix_matches_pipeline_model():
    n = _two_part()
    plat = platform()
    fit, design = fitness_score(RAV(3, 1, 0.9, 0.9, 0.9), n, plat)
    prefix = evaluate_pipeline(list(n.layers)[:3], design.pipeline.pfs, plat, 1,
                               0.9 * plat.bw_total, int(0.9 * plat.bram_total))
    assert design.generic.total_latency <= prefix.max_latency
    assert design.frames_per_sec == pytest.approx(prefix.frames_per_sec, rel=1e-12)
    assert fit == pytest.approx(design.frames_per_sec * profile_network(n).total_gop, rel=1e-12)


def test_starved_pipeline_is_dominated():
    n = zoo.vgg16_conv(32)
    plat = platform(dsp=60, bram=1000, lut=200_000, bw=1.024e11)
    # 5% of 60 DSPs pays for exactly one MAC per compute stage of the 4-layer prefix
    starved, d = fitness_score(RAV(4, 1, FRACTION_LO, 0.5, 0.5), n, plat)
    assert d.pipeline.pfs == [1, 1, 1]
    assert starved > 0
    generous, _ = fitness_score(RAV(4, 1, 0.5, 0.5, 0.5), n, plat)
    assert generous > starved


def test_fitness_is_pure():
    n = zoo.alexnet()
    rav = RAV(5, 2, 0.6, 0.7, 0.4)
    a = fitness_score(rav, n, zoo.zc706())[0]
    assert all(fitness_score(rav, n, zoo.zc706())[0] == a for _ in range(3))


def test_frozen_particle_returns_its_start():
    params = PsoParams(population=1, iterations=5, inertia=0.0, c1=0.0, c2=0.0, seed=3, batch_max=4)
    n = zoo.alexnet()
    design = pso_search(n, zoo.zc706(), params)
    rng = np.random.default_rng(3)
    lo = np.array([1.0, 1.0, FRACTION_LO, FRACTION_LO, FRACTION_LO])
    hi = np.array([len(n.layers) - 1.0, 4.0, FRACTION_HI, FRACTION_HI, FRACTION_HI])
    start = decode(lo + rng.random(5) * (hi - lo), len(n.layers) - 1, 4)
    assert design.rav == start
    assert design.throughput_gops == fitness_score(start, n, zoo.zc706())[0]
    assert len(set(design.search_trace)) == 1


def test_seeded_search_is_reproducible_and_monotone():
    params = PsoParams(population=6, iterations=6, seed=11)
    a = pso_search(zoo.resnet18(), zoo.zc706(), params)
    b = pso_search(zoo.resnet18(), zoo.zc706(), params)
    assert a.search_trace == b.search_trace and a.rav == b.rav
    assert all(x <= y for x, y in zip(a.search_trace, a.search_trace[1:]))


def test_positions_stay_in_box(monkeypatch):
    seen = []
    real = hybrid.decode

    def spy(position, sp_max, batch_max):
        seen.append(np.array(position, dtype=float))
        return real(position, sp_max, batch_max)

    monkeypatch.setattr(hybrid, "decode", spy)
    n = zoo.alexnet()
    pso_search(n, zoo.zc706(), PsoParams(population=8, iterations=8, seed=5, batch_max=6, stall_limit=8))
    lo = [1, 1, FRACTION_LO, FRACTION_LO, FRACTION_LO]
    hi = [len(n.layers) - 1, 6, FRACTION_HI, FRACTION_HI, FRACTION_HI]
    assert seen and all(np.all(p >= lo) and np.all(p <= hi) for p in seen)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=5, max_size=5), st.integers(1, 40), st.integers(1, 32))
def test_decode_lands_in_box(vec, sp_max, batch_max):
    rav = decode(vec, sp_max, batch_max)
    assert 1 <= rav.sp <= sp_max and 1 <= rav.batch <= batch_max
    assert all(FRACTION_LO <= x <= FRACTION_HI for x in (rav.dsp_p, rav.bram_p, rav.bw_p))


@pytest.mark.parametrize("kw", [dict(population=0), dict(iterations=0), dict(inertia=1.5), dict(c1=-1.0),
                                dict(batch_max=0)])
def test_params_validated(kw):
    with pytest.raises(ValidationError):
        PsoParams(**kw)


def test_generic_budget_is_platform_leftover():
    design = pso_search(zoo.vgg16_conv(224), zoo.ku115(), PsoParams(seed=0, batch_max=1))
    plat = zoo.ku115()
    assert design.resources.fits(plat)
    assert design.generic_resources == gen_resources(design.generic.config, 2)
    assert all(is_pow2(p) for p in design.pipeline.pfs)
    assert design.frames_per_sec == pytest.approx(
        design.rav.batch / max(design.pipeline.max_latency, design.generic.total_latency))
