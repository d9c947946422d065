"""Programmatic model and platform zoo used by the sweeps and the shipped samples."""
from __future__ import annotations

import json
from importlib import resources

from .network import network_from_dict, platform_from_dict

# (channels, convs) per VGG16 group
VGG16_GROUPS = ((64, 2), (128, 2), (256, 3), (512, 3), (512, 3))

# the twelve VGG16 input resolutions (height, width)
INPUT_SIZES = ((32, 32), (64, 64), (128, 128), (224, 224), (320, 320), (384, 384), (320, 480),
               (448, 448), (512, 512), (480, 800), (512, 1382), (720, 1280))

DEPTHS = (13, 18, 28, 38)

LINEARIZED_WARNING = "residual shortcuts are not modeled; the network is profiled as a linear layer sequence"


def vgg_like(extra_per_group=0, height=224, width=224, bits=16, name=None):
    """VGG16 feature extractor with ``extra_per_group`` additional CONV layers in every group."""
    layers = []
    for channels, convs in VGG16_GROUPS:
        for _ in range(convs + extra_per_group):
            layers.append({"kind": "CONV", "ch_out": channels, "kernel": 3, "stride": 1,
                           "fused_ops": ["bias", "ReLU"]})
        layers.append({"kind": "POOL", "kernel": 2, "stride": 2})
    depth = 13 + 5 * extra_per_group
    if name is None:
        name = f"vgg{depth}_conv_{height}x{width}"
    return network_from_dict({"name": name, "input_shape": [3, height, width],
                              "dw": bits, "ww": bits, "layers": layers})


def vgg16_conv(height=224, width=None, bits=16):
    return vgg_like(0, height, height if width is None else width, bits,
                    name=f"vgg16_conv_{height}x{height if width is None else width}")


def vgg_depth(depth, height=224, width=224, bits=16):
    if (depth - 13) % 5:
        raise ValueError(f"VGG-like depth must be 13 + 5k, got {depth}")
    return vgg_like((depth - 13) // 5, height, width, bits)


def _resnet(blocks, name, bits=16):
    layers = [{"kind": "CONV", "ch_out": 64, "kernel": 7, "stride": 2, "pad": 3, "fused_ops": ["BN", "ReLU"]},
              {"kind": "POOL", "kernel": 3, "stride": 2, "pad": 1}]
    for stage, (channels, count) in enumerate(zip((64, 128, 256, 512), blocks)):
        for b in range(count):
            first_stride = 2 if stage > 0 and b == 0 else 1
            layers.append({"kind": "CONV", "ch_out": channels, "kernel": 3, "stride": first_stride,
                           "fused_ops": ["BN", "ReLU"]})
            layers.append({"kind": "CONV", "ch_out": channels, "kernel": 3, "stride": 1, "fused_ops": ["BN"]})
    layers.append({"kind": "POOL", "kernel": 7, "stride": 7})
    layers.append({"kind": "FC", "ch_out": 1000, "fused_ops": ["bias"]})
    return network_from_dict({"name": name, "input_shape": [3, 224, 224], "dw": bits, "ww": bits,
                              "layers": layers, "warnings": [LINEARIZED_WARNING]})


def resnet18(bits=16):
    return _resnet((2, 2, 2, 2), "resnet18", bits)


def resnet34(bits=16):
    return _resnet((3, 4, 6, 3), "resnet34", bits)


def alexnet(bits=16):
    layers = [
        {"kind": "CONV", "ch_out": 64, "kernel": 11, "stride": 4, "pad": 2, "fused_ops": ["ReLU"]},
        {"kind": "POOL", "kernel": 3, "stride": 2},
        {"kind": "CONV", "ch_out": 192, "kernel": 5, "pad": 2, "fused_ops": ["ReLU"]},
        {"kind": "POOL", "kernel": 3, "stride": 2},
        {"kind": "CONV", "ch_out": 384, "kernel": 3, "fused_ops": ["ReLU"]},
        {"kind": "CONV", "ch_out": 256, "kernel": 3, "fused_ops": ["ReLU"]},
        {"kind": "CONV", "ch_out": 256, "kernel": 3, "fused_ops": ["ReLU"]},
        {"kind": "POOL", "kernel": 3, "stride": 2},
        {"kind": "FC", "ch_out": 4096, "fused_ops": ["ReLU"]},
        {"kind": "FC", "ch_out": 4096, "fused_ops": ["ReLU"]},
        {"kind": "FC", "ch_out": 1000},
    ]
    return network_from_dict({"name": "alexnet", "input_shape": [3, 224, 224], "dw": bits, "ww": bits,
                              "layers": layers})


MODELS = {"vgg16_conv": vgg16_conv, "resnet18": resnet18, "resnet34": resnet34, "alexnet": alexnet}


def _data(kind, name):
    return resources.files("accel_explorer").joinpath("data", kind, f"{name}.json")


def load_platform(name):
    return platform_from_dict(json.loads(_data("platforms", name).read_text()))


def ku115():
    return load_platform("ku115")


def zc706():
    return load_platform("zc706")


def sample_path(kind, name):
    """Filesystem path of a shipped sample file (``kind`` is 'models' or 'platforms')."""
    return str(_data(kind, name))
