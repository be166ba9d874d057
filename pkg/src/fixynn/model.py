"""CNN graph representation and shape/MAC/parameter arithmetic.

The graph is a flat, ordered list of layers with explicit shapes. Splitting
a network into a fixed front-end and a programmable back-end is expressed
in terms of "prefix units": the initial full convolution counts as one
unit, and each depthwise+pointwise pair counts as one unit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Invalid model structure or unsupported builder arguments."""


class LayerKind(enum.Enum):
    FULL_CONV = "full_conv"
    DEPTHWISE_CONV = "depthwise_conv"
    POINTWISE_CONV = "pointwise_conv"
    AVG_POOL = "avg_pool"
    FULLY_CONNECTED = "fully_connected"


CONV_KINDS = (LayerKind.FULL_CONV, LayerKind.DEPTHWISE_CONV, LayerKind.POINTWISE_CONV)


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    has_bn: bool = False
    has_relu: bool = False

    def __post_init__(self):
        if self.kernel < 1:
            raise ConfigurationError(f"kernel must be >= 1, got {self.kernel}")
        if self.stride not in (1, 2):
            raise ConfigurationError(f"stride must be 1 or 2, got {self.stride}")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ConfigurationError("channel counts must be >= 1")
        if self.kind is LayerKind.DEPTHWISE_CONV and self.in_channels != self.out_channels:
            raise ConfigurationError("depthwise conv requires in_channels == out_channels")
        if self.kind is LayerKind.POINTWISE_CONV and self.kernel != 1:
            raise ConfigurationError("pointwise conv requires kernel == 1")

    @property
    def is_conv(self) -> bool:
        return self.kind in CONV_KINDS

    def weight_shape(self) -> tuple[int, ...] | None:
        """Shape of the weight tensor, or None for avg-pool."""
        if self.kind is LayerKind.FULL_CONV or self.kind is LayerKind.POINTWISE_CONV:
            return (self.kernel, self.kernel, self.in_channels, self.out_channels)
        if self.kind is LayerKind.DEPTHWISE_CONV:
            return (self.kernel, self.kernel, self.in_channels)
        if self.kind is LayerKind.FULLY_CONNECTED:
            return (self.in_channels, self.out_channels)
        return None

    def out_spatial(self, h: int, w: int) -> tuple[int, int]:
        """Output spatial size under SAME padding (pool collapses to 1x1)."""
        if self.kind is LayerKind.AVG_POOL:
            return 1, 1
        if self.kind is LayerKind.FULLY_CONNECTED:
            return 1, 1
        return -(-h // self.stride), -(-w // self.stride)


def same_padding(in_size: int, kernel: int, stride: int) -> tuple[int, int]:
    """(pad_begin, pad_end) for SAME zero padding, top-left aligned grid."""
    out = -(-in_size // stride)
    total = max((out - 1) * stride + kernel - in_size, 0)
    return total // 2, total - total // 2


@dataclass(frozen=True)
class Graph:
    input_shape: tuple[int, int, int]  # (H, W, C)
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        h, w, c = self.input_shape
        if h < 1 or w < 1 or c < 1:
            raise ConfigurationError(f"bad input shape {self.input_shape}")
        if not self.layers:
            raise ConfigurationError("graph has no layers")
        fc_positions = [i for i, l in enumerate(self.layers) if l.kind is LayerKind.FULLY_CONNECTED]
        if len(fc_positions) != 1 or fc_positions[0] != len(self.layers) - 1:
            raise ConfigurationError("graph must end with exactly one fully-connected layer")
        for i, layer in enumerate(self.layers):
            if layer.in_channels != c:
                raise ConfigurationError(
                    f"layer {i}: expects {layer.in_channels} input channels, gets {c}")
            if layer.kind is LayerKind.FULLY_CONNECTED and (h, w) != (1, 1):
                raise ConfigurationError(
                    f"layer {i}: fully-connected input must be 1x1 spatial, got {h}x{w}")
            h, w = layer.out_spatial(h, w)
            if h < 1 or w < 1:
                raise ConfigurationError(f"layer {i}: spatial size collapsed below 1")
            c = layer.out_channels

    def layer_shapes(self) -> list[tuple[int, int, int]]:
        """(H, W, C) entering each layer, plus the final output shape."""
        h, w, c = self.input_shape
        shapes = [(h, w, c)]
        for layer in self.layers:
            h, w = layer.out_spatial(h, w)
            c = layer.out_channels
            shapes.append((h, w, c))
        return shapes

    def prefix_units(self) -> list[tuple[int, ...]]:
        """Group the leading conv layers into fixable units.

        A unit is either a single full convolution or one depthwise conv
        immediately followed by its pointwise conv. The prefix ends at the
        first layer that is not part of such a unit.
        """
        units: list[tuple[int, ...]] = []
        i = 0
        layers = self.layers
        while i < len(layers):
            kind = layers[i].kind
            if kind is LayerKind.FULL_CONV:
                units.append((i,))
                i += 1
            elif (kind is LayerKind.DEPTHWISE_CONV and i + 1 < len(layers)
                  and layers[i + 1].kind is LayerKind.POINTWISE_CONV):
                units.append((i, i + 1))
                i += 2
            else:
                break
        return units

    @property
    def n_fixable_units(self) -> int:
        return len(self.prefix_units())


@dataclass(frozen=True)
class MacReport:
    per_layer: tuple[int, ...]
    total: int


@dataclass(frozen=True)
class ParamReport:
    per_layer: tuple[int, ...]      # weights (+ FC bias), no BN
    total: int
    bn_per_layer: tuple[int, ...]   # scale + bias pairs, reported separately
    bn_total: int


def count_macs(graph: Graph) -> MacReport:
    """Per-layer multiply-accumulate counts. Avg-pool contributes zero."""
    shapes = graph.layer_shapes()
    per = []
    for layer, (h_in, w_in, _) in zip(graph.layers, shapes):
        h_out, w_out = layer.out_spatial(h_in, w_in)
        if layer.kind is LayerKind.FULL_CONV or layer.kind is LayerKind.POINTWISE_CONV:
            macs = h_out * w_out * layer.kernel ** 2 * layer.in_channels * layer.out_channels
        elif layer.kind is LayerKind.DEPTHWISE_CONV:
            macs = h_out * w_out * layer.kernel ** 2 * layer.out_channels
        elif layer.kind is LayerKind.FULLY_CONNECTED:
            macs = layer.in_channels * layer.out_channels
        else:
            macs = 0
        per.append(macs)
    return MacReport(tuple(per), sum(per))


def count_params(graph: Graph) -> ParamReport:
    """Weight (+ FC bias) parameter counts; BN scale/bias tallied separately."""
    per = []
    bn_per = []
    for layer in graph.layers:
        shape = layer.weight_shape()
        n = int(np.prod(shape)) if shape else 0
        if layer.kind is LayerKind.FULLY_CONNECTED:
            n += layer.out_channels  # bias
        per.append(n)
        bn_per.append(2 * layer.out_channels if layer.has_bn else 0)
    return ParamReport(tuple(per), sum(per), tuple(bn_per), sum(bn_per))


def fixed_ops_fraction(graph: Graph, n_fixed: int) -> float:
    """Share of total MACs (FC included in the denominator) covered by the
    first n_fixed prefix units. The FC layer is never part of the prefix."""
    units = graph.prefix_units()
    if not 0 <= n_fixed <= len(units):
        raise ConfigurationError(
            f"n_fixed={n_fixed} out of range 0..{len(units)}")
    macs = count_macs(graph)
    prefix = sum(macs.per_layer[i] for unit in units[:n_fixed] for i in unit)
    return prefix / macs.total


# Canonical MobileNet body: (pointwise output channels, depthwise stride)
# for the 13 separable blocks following the initial 3x3 stride-2 conv.
_MOBILENET_BLOCKS = [
    (64, 1), (128, 2), (128, 1), (256, 2), (256, 1), (512, 2),
    (512, 1), (512, 1), (512, 1), (512, 1), (512, 1), (1024, 2), (1024, 1),
]


def build_mobilenet(width_multiplier: float, input_resolution: int,
                    num_classes: int = 1000) -> Graph:
    """Standard 14-unit MobileNet: conv + 13 separable blocks + pool + FC.

    Channel counts are scaled by the width multiplier and rounded half-up
    with a floor of one channel.
    """
    if width_multiplier not in (0.25, 0.5, 0.75, 1.0):
        raise ConfigurationError(f"unsupported width multiplier {width_multiplier}")
    if input_resolution % 32 != 0 or input_resolution <= 0:
        raise ConfigurationError(f"input resolution must be divisible by 32, got {input_resolution}")
    if num_classes < 1:
        raise ConfigurationError("num_classes must be >= 1")

    def scaled(ch: int) -> int:
        return max(1, math.floor(ch * width_multiplier + 0.5))

    layers = [LayerSpec(LayerKind.FULL_CONV, 3, scaled(32), kernel=3, stride=2,
                        has_bn=True, has_relu=True)]
    c = scaled(32)
    for out, stride in _MOBILENET_BLOCKS:
        layers.append(LayerSpec(LayerKind.DEPTHWISE_CONV, c, c, kernel=3, stride=stride,
                                has_bn=True, has_relu=True))
        layers.append(LayerSpec(LayerKind.POINTWISE_CONV, c, scaled(out), kernel=1,
                                has_bn=True, has_relu=True))
        c = scaled(out)
    pool_k = input_resolution // 32
    layers.append(LayerSpec(LayerKind.AVG_POOL, c, c, kernel=pool_k))
    layers.append(LayerSpec(LayerKind.FULLY_CONNECTED, c, num_classes, kernel=1))
    return Graph((input_resolution, input_resolution, 3), tuple(layers))


@dataclass
class ModelBundle:
    """A graph plus its real-valued parameters.

    weights maps layer index -> weight tensor; bn_params maps layer index
    -> (scale, bias) per channel; fc_bias maps the FC layer index to its
    bias vector.
    """
    graph: Graph
    weights: dict[int, np.ndarray] = field(default_factory=dict)
    bn_params: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    fc_bias: dict[int, np.ndarray] = field(default_factory=dict)

    def validate(self) -> None:
        for i, layer in enumerate(self.graph.layers):
            shape = layer.weight_shape()
            if shape is not None:
                if i not in self.weights:
                    raise ConfigurationError(f"layer {i}: missing weight tensor")
                if tuple(self.weights[i].shape) != shape:
                    raise ConfigurationError(
                        f"layer {i}: weight shape {self.weights[i].shape}, expected {shape}")
            elif i in self.weights:
                raise ConfigurationError(f"layer {i}: unexpected weight tensor")
            if layer.has_bn:
                if i not in self.bn_params:
                    raise ConfigurationError(f"layer {i}: missing BN parameters")
                scale, bias = self.bn_params[i]
                if scale.shape != (layer.out_channels,) or bias.shape != (layer.out_channels,):
                    raise ConfigurationError(f"layer {i}: BN parameter shape mismatch")
            if layer.kind is LayerKind.FULLY_CONNECTED:
                bias = self.fc_bias.get(i)
                if bias is not None and bias.shape != (layer.out_channels,):
                    raise ConfigurationError(f"layer {i}: FC bias shape mismatch")

    def with_bn(self, layer_index: int, scale: np.ndarray, bias: np.ndarray) -> "ModelBundle":
        bn = dict(self.bn_params)
        bn[layer_index] = (np.asarray(scale, dtype=np.float32),
                           np.asarray(bias, dtype=np.float32))
        return ModelBundle(self.graph, self.weights, bn, self.fc_bias)


def random_bundle(graph: Graph, seed: int) -> ModelBundle:
    """Seeded random parameters: fan-in scaled weights, BN near identity."""
    rng = np.random.default_rng(seed)
    weights: dict[int, np.ndarray] = {}
    bn: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    fc_bias: dict[int, np.ndarray] = {}
    for i, layer in enumerate(graph.layers):
        shape = layer.weight_shape()
        if shape is not None:
            fan_in = int(np.prod(shape[:-1])) if layer.kind is not LayerKind.DEPTHWISE_CONV \
                else layer.kernel ** 2
            sigma = 1.0 / math.sqrt(fan_in)
            weights[i] = rng.normal(0.0, sigma, size=shape).astype(np.float32)
        if layer.has_bn:
            scale = rng.uniform(0.5, 1.5, size=layer.out_channels).astype(np.float32)
            bias = rng.normal(0.0, 0.25, size=layer.out_channels).astype(np.float32)
            bn[i] = (scale, bias)
        if layer.kind is LayerKind.FULLY_CONNECTED:
            fc_bias[i] = rng.normal(0.0, 0.05, size=layer.out_channels).astype(np.float32)
    bundle = ModelBundle(graph, weights, bn, fc_bias)
    bundle.validate()
    return bundle
