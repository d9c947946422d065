"""Random small networks and platforms for the property suites."""
from __future__ import annotations

import numpy as np

from accel_explorer.network import network_from_dict, platform_from_dict


def random_network(rng, max_layers=7):
    bits = int(rng.choice([8, 16]))
    ch = int(rng.integers(1, 17))
    h = int(rng.integers(4, 65))
    w = int(rng.integers(4, 65))
    n = int(rng.integers(2, max_layers + 1))
    layers = []
    size = min(h, w)
    for i in range(n):
        last = i == n - 1
        roll = rng.random()
        if last and roll < 0.3:
            layers.append({"kind": "FC", "ch_out": int(rng.integers(1, 1025))})
            break
        if roll < 0.2 and size >= 2 and layers:
            layers.append({"kind": "POOL", "kernel": 2, "stride": 2})
            size //= 2
            continue
        k = int(rng.choice([1, 3, 5])) if size >= 5 else 1
        stride = int(rng.choice([1, 2])) if size >= 4 else 1
        layers.append({"kind": "CONV", "ch_out": int(rng.choice([8, 16, 24, 32, 64, 96, 128, 256])),
                       "kernel": k, "stride": stride})
        size = (size + 2 * ((k - 1) // 2) - k) // stride + 1
    if all(l["kind"] == "POOL" for l in layers):
        layers.append({"kind": "CONV", "ch_out": 16, "kernel": 1})
    return network_from_dict({"name": "rand", "input_shape": [ch, h, w], "dw": bits, "ww": bits,
                              "layers": layers})


def random_platform(rng):
    # LUT/DSP and BRAM/DSP ratios span the range of real Zynq/UltraScale parts
    dsp = int(rng.integers(64, 6001))
    return platform_from_dict({
        "name": "rand",
        "dsp_total": dsp,
        "bram18k_total": max(16, int(dsp * rng.uniform(0.4, 2.0))),
        "lut_total": int(dsp * rng.uniform(100, 400)),
        "bw_bits_per_sec": float(rng.uniform(2e9, 2e11)),
        "freq_hz": float(rng.choice([1e8, 1.5e8, 2e8, 2.5e8])),
    })


def random_triple(index):
    rng = np.random.default_rng(1000 + index)
    return random_network(rng), random_platform(rng), int(rng.integers(0, 2**31))
