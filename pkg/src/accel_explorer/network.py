"""Network and hardware-platform descriptions.

Network files are JSON documents of the form::

    {
      "name": "vgg16_conv",
      "input_shape": [3, 224, 224],          # channels, height, width
      "dw": 16, "ww": 16,                    # optional network-wide bit-widths
      "layers": [
        {"kind": "CONV", "ch_out": 64, "kernel": 3, "stride": 1},
        {"kind": "POOL", "kernel": 2, "stride": 2},
        {"kind": "FC", "ch_out": 1000}
      ]
    }

Per-layer keys: ``kind`` (CONV, POOL, FC), ``ch_out`` (CONV/FC), ``kernel``
(int or ``[r, s]``), ``stride``, ``pad`` (int or ``[pad_h, pad_w]``; CONV
defaults to same padding, POOL to 0), ``dw``, ``ww``, ``fused_ops``. The
derived fields ``h_in``, ``w_in``, ``ch_in``, ``h_out``, ``w_out`` may be
given; they are checked against the shape chain.

An FC layer flattens whatever it receives: ``ch_in = C * H * W`` of the
previous output, and it is stored with unit spatial dims and kernel.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError

CONV = "CONV"
POOL = "POOL"
FC = "FC"
LAYER_KINDS = (CONV, POOL, FC)
FUSED_OPS = ("BN", "ReLU", "bias")
BITWIDTHS = (8, 16)

_DERIVED_KEYS = ("h_in", "w_in", "ch_in", "h_out", "w_out")
_LAYER_KEYS = {"index", "kind", "ch_out", "kernel", "r", "s", "stride", "pad",
               "dw", "ww", "fused_ops", "name", *_DERIVED_KEYS}


@dataclass(frozen=True)
class LayerDescriptor:
    index: int
    kind: str
    h_in: int
    w_in: int
    ch_in: int
    ch_out: int
    r: int
    s: int
    stride: int
    pad_h: int
    pad_w: int
    h_out: int
    w_out: int
    dw: int = 16
    ww: int = 16
    fused_ops: tuple = ()

    @property
    def is_compute(self):
        return self.kind != POOL

    @property
    def macs(self):
        if self.kind == POOL:
            return 0
        return self.h_out * self.w_out * self.r * self.s * self.ch_in * self.ch_out


@dataclass(frozen=True)
class NetworkModel:
    name: str
    input_shape: tuple
    layers: tuple
    warnings: tuple = field(default=(), compare=False)

    def __len__(self):
        return len(self.layers)

    @property
    def output_shape(self):
        last = self.layers[-1]
        return (last.ch_out, last.h_out, last.w_out)


@dataclass(frozen=True)
class HardwarePlatform:
    name: str
    dsp_total: int
    bram_total: int
    lut_total: int
    bw_total: float  # bits/s
    freq: float  # Hz

    def alpha(self, bitwidth):
        """MACs one DSP slice retires per cycle at the given operand width."""
        if bitwidth == 16:
            return 2
        if bitwidth == 8:
            return 4
        raise ValueError(f"alpha is undefined for {bitwidth}-bit operands")


def out_dim(size, kernel, pad, stride):
    return (size + 2 * pad - kernel) // stride + 1


def _load_json(text):
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not valid UTF-8: {exc.reason} at byte {exc.start}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", exc.lineno, exc.colno) from None
    except RecursionError:
        raise ParseError("malformed JSON: nesting too deep") from None


def _int_field(obj, key, where, default=None, positive=True):
    value = obj.get(key, default)
    if value is None:
        raise ValidationError(f"{where}: missing required field '{key}'")
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{where}: field '{key}' must be an integer, got {value!r}")
    if positive and value <= 0:
        raise ValidationError(f"{where}: {key} must be positive")
    if not positive and value < 0:
        raise ValidationError(f"{where}: {key} must be non-negative")
    return value


def _pair_field(obj, key, where, default):
    value = obj.get(key, default)
    if isinstance(value, list) and len(value) == 2:
        return tuple(value)
    if isinstance(value, list):
        raise ValidationError(f"{where}: field '{key}' must be an integer or a pair")
    return (value, value)


def _build_layer(index, spec, shape, defaults):
    where = f"layer {index}"
    if not isinstance(spec, dict):
        raise ValidationError(f"{where}: expected an object, got {type(spec).__name__}")
    unknown = set(spec) - _LAYER_KEYS
    if unknown:
        raise ValidationError(f"{where}: unknown field(s) {sorted(unknown)}")
    kind = spec.get("kind")
    if isinstance(kind, str):
        kind = kind.upper()
    if kind not in LAYER_KINDS:
        raise ValidationError(
            f"{where}: unsupported layer kind {spec.get('kind')!r}; supported kinds: {', '.join(LAYER_KINDS)}")
    if "index" in spec and spec["index"] != index:
        raise ValidationError(f"{where}: index {spec['index']!r} is not contiguous (expected {index})")

    ch, h, w = shape
    dw = _int_field(spec, "dw", where, defaults["dw"])
    ww = _int_field(spec, "ww", where, defaults["ww"])
    for name, bits in (("dw", dw), ("ww", ww)):
        if bits not in BITWIDTHS:
            raise ValidationError(f"{where}: {name} must be 8 or 16, got {bits}")
    fused = spec.get("fused_ops", [])
    if not isinstance(fused, list) or any(op not in FUSED_OPS for op in fused):
        raise ValidationError(f"{where}: fused_ops must be a list drawn from {list(FUSED_OPS)}")

    if kind == FC:
        flat = ch * h * w
        ch_out = _int_field(spec, "ch_out", where)
        r = s = stride = 1
        pad_h = pad_w = 0
        h_in, w_in, ch_in = 1, 1, flat
        for key in ("kernel", "r", "s", "stride"):
            if key in spec and spec[key] not in (1, [1, 1]):
                raise ValidationError(f"{where}: FC layers require {key} = 1")
        if "pad" in spec and spec["pad"] not in (0, [0, 0]):
            raise ValidationError(f"{where}: FC layers require pad = 0")
        # either the flattened view or the raw previous output is accepted
        allowed = {"ch_in": (flat, ch), "h_in": (1, h), "w_in": (1, w)}
        for key, values in allowed.items():
            if key in spec and spec[key] not in values:
                raise ValidationError(
                    f"{where}: shape chain violation, {key}={spec[key]} but previous output gives {values[0]}")
    else:
        h_in, w_in, ch_in = h, w, ch
        for key, val in (("ch_in", ch), ("h_in", h), ("w_in", w)):
            if key in spec and spec[key] != val:
                raise ValidationError(f"{where}: shape chain violation, {key}={spec[key]} but previous output gives {val}")
        if "kernel" in spec:
            r, s = _pair_field(spec, "kernel", where, None)
        else:
            r, s = spec.get("r"), spec.get("s")
        for name, value in (("kernel height", r), ("kernel width", s)):
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                raise ValidationError(f"{where}: {name} must be a positive integer, got {value!r}")
        stride = _int_field(spec, "stride", where, 1)
        default_pad = ((r - 1) // 2, (s - 1) // 2) if kind == CONV else (0, 0)
        pad_h, pad_w = _pair_field(spec, "pad", where, None) if "pad" in spec else default_pad
        for value in (pad_h, pad_w):
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ValidationError(f"{where}: pad must be a non-negative integer")
        if kind == POOL:
            ch_out = spec.get("ch_out", ch_in)
            if ch_out != ch_in:
                raise ValidationError(f"{where}: POOL layers require ch_out == ch_in ({ch_in}), got {ch_out!r}")
        else:
            ch_out = _int_field(spec, "ch_out", where)

    h_out = out_dim(h_in, r, pad_h, stride)
    w_out = out_dim(w_in, s, pad_w, stride)
    if h_out <= 0 or w_out <= 0:
        raise ValidationError(f"{where}: kernel {r}x{s} does not fit a {h_in}x{w_in} input")
    for key, val in (("h_out", h_out), ("w_out", w_out)):
        if key in spec and spec[key] != val:
            raise ValidationError(f"{where}: declared {key}={spec[key]} but derived value is {val}")
    if "ch_out" in spec and spec["ch_out"] != ch_out:
        raise ValidationError(f"{where}: declared ch_out={spec['ch_out']} but derived value is {ch_out}")

    return LayerDescriptor(index=index, kind=kind, h_in=h_in, w_in=w_in, ch_in=ch_in, ch_out=ch_out,
                           r=r, s=s, stride=stride, pad_h=pad_h, pad_w=pad_w, h_out=h_out, w_out=w_out,
                           dw=dw, ww=ww, fused_ops=tuple(fused))


def network_from_dict(doc):
    if not isinstance(doc, dict):
        raise ValidationError("network document must be a JSON object")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ValidationError("network: 'name' must be a non-empty string")
    shape = doc.get("input_shape")
    if not isinstance(shape, list) or len(shape) != 3 or any(
            isinstance(v, bool) or not isinstance(v, int) or v <= 0 for v in shape):
        raise ValidationError("network: 'input_shape' must be [channels, height, width] of positive integers")
    layers_doc = doc.get("layers")
    if not isinstance(layers_doc, list):
        raise ValidationError("network: 'layers' must be an array")
    if not layers_doc:
        raise ValidationError("network has no layers")
    defaults = {"dw": doc.get("dw", 16), "ww": doc.get("ww", 16)}

    layers = []
    current = tuple(shape)
    for i, spec in enumerate(layers_doc, start=1):
        layer = _build_layer(i, spec, current, defaults)
        layers.append(layer)
        current = (layer.ch_out, layer.h_out, layer.w_out)
    warnings = doc.get("warnings", [])
    if not isinstance(warnings, list):
        warnings = []
    return NetworkModel(name=name, input_shape=tuple(shape), layers=tuple(layers),
                        warnings=tuple(str(w) for w in warnings))


def parse_network(text):
    """Parse a network JSON document (str or bytes) into a NetworkModel."""
    return network_from_dict(_load_json(text))


def layer_to_dict(layer):
    return {
        "index": layer.index, "kind": layer.kind,
        "h_in": layer.h_in, "w_in": layer.w_in, "ch_in": layer.ch_in, "ch_out": layer.ch_out,
        "kernel": [layer.r, layer.s], "stride": layer.stride, "pad": [layer.pad_h, layer.pad_w],
        "h_out": layer.h_out, "w_out": layer.w_out, "dw": layer.dw, "ww": layer.ww,
        "fused_ops": list(layer.fused_ops),
    }


def network_to_dict(net):
    doc = {"name": net.name, "input_shape": list(net.input_shape),
           "layers": [layer_to_dict(layer) for layer in net.layers]}
    if net.warnings:
        doc["warnings"] = list(net.warnings)
    return doc


def dump_network(net):
    return json.dumps(network_to_dict(net), indent=2)


_PLATFORM_FIELDS = (
    ("dsp_total", "dsp_total", int),
    ("bram18k_total", "bram_total", int),
    ("lut_total", "lut_total", int),
    ("bw_bits_per_sec", "bw_total", float),
    ("freq_hz", "freq", float),
)


def platform_from_dict(doc):
    if not isinstance(doc, dict):
        raise ValidationError("platform document must be a JSON object")
    name = doc.get("name", "platform")
    if not isinstance(name, str):
        raise ValidationError("platform: 'name' must be a string")
    values = {}
    for key, attr, kind in _PLATFORM_FIELDS:
        if key not in doc:
            raise ValidationError(f"platform: missing required field '{key}'")
        value = doc[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"platform: {key} must be a number, got {value!r}")
        if kind is int and value != int(value):
            raise ValidationError(f"platform: {key} must be an integer")
        if not value > 0:
            raise ValidationError(f"{attr} must be positive")
        values[attr] = kind(value)
    return HardwarePlatform(name=name, **values)


def parse_platform(text):
    return platform_from_dict(_load_json(text))


def platform_to_dict(platform):
    return {"name": platform.name, "dsp_total": platform.dsp_total,
            "bram18k_total": platform.bram_total, "lut_total": platform.lut_total,
            "bw_bits_per_sec": platform.bw_total, "freq_hz": platform.freq}
