"""Per-layer operation counts, external traffic and CTC ratios.

All counts are exact integers; CTC values are ``Fraction`` so medians and
ratios across networks can be compared without rounding.

CTC charges a layer for the traffic that has to cross the chip boundary
when feature maps stay on chip: its weights. Layers without weights (POOL)
fall back to their feature-map traffic. The full per-tensor traffic is
still reported alongside.
"""
from __future__ import annotations

import statistics
from dataclasses import dataclass
from fractions import Fraction

from .network import CONV, FC, POOL


@dataclass(frozen=True)
class LayerWorkload:
    index: int
    kind: str
    ops: int
    weight_bits: int
    ifm_bits: int
    ofm_bits: int

    @property
    def traffic_bits(self):
        return self.weight_bits + self.ifm_bits + self.ofm_bits

    @property
    def traffic_bytes(self):
        return Fraction(self.traffic_bits, 8)

    @property
    def ctc_bits(self):
        """Traffic the CTC is charged against: weights, or feature maps for weightless layers."""
        return self.weight_bits if self.weight_bits else self.traffic_bits

    @property
    def ctc(self):
        """Operations per byte of external traffic."""
        return Fraction(self.ops * 8, self.ctc_bits)


@dataclass(frozen=True)
class WorkloadProfile:
    per_layer: tuple

    @property
    def total_ops(self):
        return sum(w.ops for w in self.per_layer)

    @property
    def total_gop(self):
        return self.total_ops / 1e9

    @property
    def mac_ops(self):
        return sum(w.ops for w in self.per_layer if w.kind != POOL)

    @property
    def pool_ops(self):
        return sum(w.ops for w in self.per_layer if w.kind == POOL)

    def bw_total_norm(self, sp=None, start=1):
        """Sum of OP_i / CTC_i (= CTC bytes) over layers ``start..sp`` (1-based, inclusive)."""
        sp = len(self.per_layer) if sp is None else sp
        return sum((Fraction(w.ctc_bits, 8) for w in self.per_layer[start - 1:sp]), Fraction(0))

    def ctcs(self, kinds=(CONV,)):
        return [w.ctc for w in self.per_layer if w.kind in kinds]

    def median_ctc(self, kinds=(CONV,)):
        return statistics.median(self.ctcs(kinds))


def layer_ops(layer):
    """Operation count; one MAC is two operations, a pooling window element is one."""
    if layer.kind == POOL:
        return layer.h_out * layer.w_out * layer.r * layer.s * layer.ch_in
    return 2 * layer.macs


def layer_traffic(layer):
    """(weight_bits, ifm_bits, ofm_bits), every tensor moved exactly once."""
    weight_bits = 0 if layer.kind == POOL else layer.r * layer.s * layer.ch_in * layer.ch_out * layer.ww
    ifm_bits = layer.h_in * layer.w_in * layer.ch_in * layer.dw
    ofm_bits = layer.h_out * layer.w_out * layer.ch_out * layer.dw
    return weight_bits, ifm_bits, ofm_bits


def layer_ctc(layer):
    return layer_workload(layer).ctc


def layer_workload(layer):
    return LayerWorkload(layer.index, layer.kind, layer_ops(layer), *layer_traffic(layer))


def profile_network(net):
    return WorkloadProfile(tuple(layer_workload(layer) for layer in net.layers))


PROFILE_COLUMNS = ("index", "kind", "ops", "weight_bits", "ifm_bits", "ofm_bits", "ctc")


def profile_rows(profile):
    for w in profile.per_layer:
        yield (w.index, w.kind, w.ops, w.weight_bits, w.ifm_bits, w.ofm_bits, f"{float(w.ctc):.6f}")


__all__ = ["LayerWorkload", "WorkloadProfile", "layer_ops", "layer_traffic", "layer_ctc",
           "layer_workload", "profile_network", "profile_rows", "PROFILE_COLUMNS", "CONV", "FC", "POOL"]
