"""Fixed-weight datapath netlists.

freeze() lowers the first N prefix units of a frozen model into a
fully-parallel, fully-pipelined structural description: one stage per conv
layer, each producing one complete output pixel (all channels) per cycle.
Weights become constant-coefficient multipliers — zero weights vanish —
and the only writable state is the per-channel BN register file (when
programmable). The description is self-contained: the simulator and RTL
emitter walk these structures, never the source Graph.

Structural conventions baked in here and matched by the emitted RTL:
  * line buffers hold k−1 input rows: (k−1)·W_in·C_in·8 bits;
  * stage latency = window fill ((k−1)·W_in + k input pixels)
    + adder-tree depth ceil(log2(max fan-in)) + 3 (BN, requant, ReLU);
  * frame interval = max over stages of output pixels per frame
    (stride-2 stages idle on skipped rows/columns);
  * register bits per stage = window (k²·C_in·8) + accumulator
    (32/channel) + output (8/channel) + BN file (48/channel) when
    programmable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .compress import FrozenModel
from .model import ConfigurationError, LayerKind, same_padding

NETLIST_VERSION = 1


@dataclass(frozen=True)
class FreezeSpec:
    n_fixed: int
    taps: frozenset[int] = frozenset()
    bn_programmable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "taps", frozenset(self.taps))
        if self.n_fixed < 0:
            raise ConfigurationError(f"n_fixed must be >= 0, got {self.n_fixed}")
        if any(not 1 <= t <= self.n_fixed for t in self.taps):
            raise ConfigurationError(
                f"taps {sorted(self.taps)} outside boundaries 1..{self.n_fixed}")


@dataclass(frozen=True)
class Multiplier:
    out_channel: int
    ky: int
    kx: int
    in_channel: int
    weight: int          # nonzero int8 constant

    def __post_init__(self):
        if self.weight == 0:
            raise ConfigurationError("zero-weight multiplier is not a hardware unit")


@dataclass(frozen=True)
class Stage:
    layer_index: int
    kind: LayerKind
    in_h: int
    in_w: int
    in_channels: int
    out_h: int
    out_w: int
    out_channels: int
    kernel: int
    stride: int
    pad_top: int
    pad_left: int
    relu: bool
    multipliers: tuple[Multiplier, ...]
    bn_multiplier: tuple[int, ...]      # per out channel, int16 range
    bn_bias: tuple[int, ...]            # per out channel, int32
    bn_shift: int
    out_exponent: int

    def __post_init__(self):
        if len(self.bn_multiplier) != self.out_channels or len(self.bn_bias) != self.out_channels:
            raise ConfigurationError(
                f"stage {self.layer_index}: BN register file size mismatch")
        for m in self.multipliers:
            if not (0 <= m.ky < self.kernel and 0 <= m.kx < self.kernel
                    and 0 <= m.in_channel < self.in_channels
                    and 0 <= m.out_channel < self.out_channels):
                raise ConfigurationError(
                    f"stage {self.layer_index}: multiplier tap {m} out of range")

    def terms_per_channel(self) -> list[int]:
        terms = [0] * self.out_channels
        for m in self.multipliers:
            terms[m.out_channel] += 1
        return terms

    @property
    def multiplier_count(self) -> int:
        return len(self.multipliers)

    @property
    def adder_count(self) -> int:
        return sum(max(t - 1, 0) for t in self.terms_per_channel())

    @property
    def max_fan_in(self) -> int:
        return max(self.terms_per_channel(), default=0)

    @property
    def line_buffer_bits(self) -> int:
        return (self.kernel - 1) * self.in_w * self.in_channels * 8

    @property
    def window_bits(self) -> int:
        return self.kernel ** 2 * self.in_channels * 8

    def register_bits(self, bn_programmable: bool) -> int:
        bits = self.window_bits + (32 + 8) * self.out_channels
        if bn_programmable:
            bits += 48 * self.out_channels       # 16-bit multiplier + 32-bit bias
        return bits

    @property
    def window_fill(self) -> int:
        return (self.kernel - 1) * self.in_w + self.kernel

    @property
    def latency(self) -> int:
        tree = math.ceil(math.log2(max(self.max_fan_in, 1)))
        return self.window_fill + tree + 3

    @property
    def out_pixels(self) -> int:
        return self.out_h * self.out_w

    @property
    def dense_weight_count(self) -> int:
        if self.kind is LayerKind.DEPTHWISE_CONV:
            return self.kernel ** 2 * self.out_channels
        return self.kernel ** 2 * self.in_channels * self.out_channels

    @property
    def dense_macs(self) -> int:
        return self.out_pixels * self.dense_weight_count


@dataclass(frozen=True)
class TapPort:
    boundary: int        # prefix-unit index (1-based)
    stage_index: int     # position in Netlist.stages whose output is exposed


@dataclass(frozen=True)
class Netlist:
    input_h: int
    input_w: int
    input_channels: int
    input_exponent: int
    bits: int
    bn_programmable: bool
    stages: tuple[Stage, ...]
    taps: tuple[TapPort, ...]
    version: int = NETLIST_VERSION

    def __post_init__(self):
        for t in self.taps:
            if not 0 <= t.stage_index < len(self.stages):
                raise ConfigurationError(f"tap at boundary {t.boundary} points past the pipeline")
        h, w, c = self.input_h, self.input_w, self.input_channels
        for s in self.stages:
            if (s.in_h, s.in_w, s.in_channels) != (h, w, c):
                raise ConfigurationError(
                    f"stage {s.layer_index}: expects {s.in_h}x{s.in_w}x{s.in_channels}, "
                    f"upstream provides {h}x{w}x{c}")
            h, w, c = s.out_h, s.out_w, s.out_channels

    @property
    def pipeline_depth(self) -> int:
        return sum(s.latency for s in self.stages)

    @property
    def frame_interval(self) -> int:
        return max((s.out_pixels for s in self.stages), default=0)

    @property
    def dense_macs(self) -> int:
        return sum(s.dense_macs for s in self.stages)

    @property
    def output_shape(self) -> tuple[int, int, int]:
        if not self.stages:
            return self.input_h, self.input_w, self.input_channels
        last = self.stages[-1]
        return last.out_h, last.out_w, last.out_channels

    @property
    def output_exponent(self) -> int:
        return self.stages[-1].out_exponent if self.stages else self.input_exponent


@dataclass(frozen=True)
class PipelineStats:
    multipliers: int
    adders: int
    register_bits: int
    line_buffer_bits: int
    pipeline_depth: int
    max_stage_pixels: int


def freeze(frozen: FrozenModel, spec: FreezeSpec) -> Netlist:
    """Lower the first spec.n_fixed prefix units into a Netlist."""
    if not isinstance(frozen, FrozenModel):
        raise ConfigurationError("freeze requires a frozen (quantized) model")
    graph = frozen.graph
    units = graph.prefix_units()
    if spec.n_fixed > len(units):
        raise ConfigurationError(
            f"n_fixed={spec.n_fixed} exceeds the {len(units)} fixable units")
    shapes = graph.layer_shapes()
    stages: list[Stage] = []
    boundary_of_stage: dict[int, int] = {}
    for k, unit in enumerate(units[:spec.n_fixed], start=1):
        for li in unit:
            layer = graph.layers[li]
            h_in, w_in, _ = shapes[li]
            h_out, w_out = layer.out_spatial(h_in, w_in)
            regs = frozen.requant_registers(li)
            stages.append(Stage(
                layer_index=li,
                kind=layer.kind,
                in_h=h_in, in_w=w_in, in_channels=layer.in_channels,
                out_h=h_out, out_w=w_out, out_channels=layer.out_channels,
                kernel=layer.kernel, stride=layer.stride,
                pad_top=same_padding(h_in, layer.kernel, layer.stride)[0],
                pad_left=same_padding(w_in, layer.kernel, layer.stride)[0],
                relu=layer.has_relu,
                multipliers=_multipliers_of(layer, frozen.qweights[li].values),
                bn_multiplier=tuple(int(v) for v in regs.multiplier),
                bn_bias=tuple(int(v) for v in regs.bias),
                bn_shift=regs.shift,
                out_exponent=frozen.act_exponents[li],
            ))
        boundary_of_stage[k] = len(stages) - 1
    taps = tuple(TapPort(k, boundary_of_stage[k]) for k in sorted(spec.taps))
    h, w, c = graph.input_shape
    return Netlist(h, w, c, frozen.input_exponent, frozen.bits,
                   spec.bn_programmable, tuple(stages), taps)


def _multipliers_of(layer, weights: np.ndarray) -> tuple[Multiplier, ...]:
    mults = []
    if layer.kind is LayerKind.DEPTHWISE_CONV:
        for ky, kx, c in np.argwhere(weights != 0):
            mults.append((int(c), int(ky), int(kx), int(c), int(weights[ky, kx, c])))
    else:
        for ky, kx, ci, co in np.argwhere(weights != 0):
            mults.append((int(co), int(ky), int(kx), int(ci),
                          int(weights[ky, kx, ci, co])))
    mults.sort(key=lambda m: m[:4])
    return tuple(Multiplier(*m) for m in mults)


def pipeline_stats(netlist: Netlist) -> PipelineStats:
    """Exact structural counts feeding the PPA model."""
    return PipelineStats(
        multipliers=sum(s.multiplier_count for s in netlist.stages),
        adders=sum(s.adder_count for s in netlist.stages),
        register_bits=sum(s.register_bits(netlist.bn_programmable)
                          for s in netlist.stages),
        line_buffer_bits=sum(s.line_buffer_bits for s in netlist.stages),
        pipeline_depth=netlist.pipeline_depth,
        max_stage_pixels=netlist.frame_interval,
    )


# ----------------------------------------------------------- serialization

def netlist_to_dict(netlist: Netlist) -> dict:
    return {
        "format": "ffe-netlist",
        "version": netlist.version,
        "input": {"h": netlist.input_h, "w": netlist.input_w,
                  "channels": netlist.input_channels,
                  "exponent": netlist.input_exponent},
        "bits": netlist.bits,
        "bn_programmable": netlist.bn_programmable,
        "taps": [{"boundary": t.boundary, "stage": t.stage_index} for t in netlist.taps],
        "stages": [
            {
                "layer_index": s.layer_index,
                "kind": s.kind.value,
                "in": [s.in_h, s.in_w, s.in_channels],
                "out": [s.out_h, s.out_w, s.out_channels],
                "kernel": s.kernel,
                "stride": s.stride,
                "pad": [s.pad_top, s.pad_left],
                "relu": s.relu,
                "bn_shift": s.bn_shift,
                "bn_multiplier": list(s.bn_multiplier),
                "bn_bias": list(s.bn_bias),
                "out_exponent": s.out_exponent,
                "multipliers": [[m.out_channel, m.ky, m.kx, m.in_channel, m.weight]
                                for m in s.multipliers],
            }
            for s in netlist.stages
        ],
    }


def netlist_from_dict(doc: dict) -> Netlist:
    if doc.get("format") != "ffe-netlist":
        raise ConfigurationError("not a netlist document")
    if doc.get("version") != NETLIST_VERSION:
        raise ConfigurationError(f"unsupported netlist version {doc.get('version')}")
    stages = tuple(
        Stage(
            layer_index=int(s["layer_index"]),
            kind=LayerKind(s["kind"]),
            in_h=int(s["in"][0]), in_w=int(s["in"][1]), in_channels=int(s["in"][2]),
            out_h=int(s["out"][0]), out_w=int(s["out"][1]), out_channels=int(s["out"][2]),
            kernel=int(s["kernel"]), stride=int(s["stride"]),
            pad_top=int(s["pad"][0]), pad_left=int(s["pad"][1]),
            relu=bool(s["relu"]),
            multipliers=tuple(Multiplier(*(int(x) for x in m)) for m in s["multipliers"]),
            bn_multiplier=tuple(int(v) for v in s["bn_multiplier"]),
            bn_bias=tuple(int(v) for v in s["bn_bias"]),
            bn_shift=int(s["bn_shift"]),
            out_exponent=int(s["out_exponent"]),
        )
        for s in doc["stages"]
    )
    inp = doc["input"]
    return Netlist(int(inp["h"]), int(inp["w"]), int(inp["channels"]),
                   int(inp["exponent"]), int(doc["bits"]),
                   bool(doc["bn_programmable"]), stages,
                   tuple(TapPort(int(t["boundary"]), int(t["stage"]))
                         for t in doc["taps"]))


def save_netlist(path: str | Path, netlist: Netlist) -> None:
    Path(path).write_text(json.dumps(netlist_to_dict(netlist), indent=1) + "\n")


def load_netlist(path: str | Path) -> Netlist:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON: {exc}") from exc
    return netlist_from_dict(doc)
