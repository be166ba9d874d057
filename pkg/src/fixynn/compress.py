"""Model compression: magnitude pruning and 8-bit power-of-two quantization.

Weights get per-tensor scales; activations get per-layer scales calibrated
by max-abs over a user-supplied batch. Batch-norm stays un-folded — it is
lowered to per-channel integer (multiplier, bias) register values at a
per-layer shift, so the hardware can be reprogrammed with new BN parameters
without touching the fixed weights.

Scales are powers of two throughout: real value ≈ int8 value × 2^exponent.
Rescaling in the datapath is then a pure shift, and one rounding rule
(round-half-to-even) is shared by the quantizer, the reference executor,
and the datapath simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import formats
from .model import (ConfigurationError, Graph, LayerKind, ModelBundle,
                    same_padding)


class EncodingError(ValueError):
    """Value cannot be represented in the fixed-point format at hand."""


@dataclass(frozen=True)
class PruneSpec:
    target_sparsity: float
    granularity: str = "per-layer"

    def __post_init__(self):
        if not 0.0 <= self.target_sparsity <= 1.0:
            raise ConfigurationError(
                f"sparsity must be in [0, 1], got {self.target_sparsity}")
        if self.granularity != "per-layer":
            raise ConfigurationError(f"unsupported granularity {self.granularity!r}")


@dataclass(frozen=True)
class QuantizedTensor:
    values: np.ndarray           # int8
    scale_exponent: int          # real ≈ values · 2^scale_exponent

    def __post_init__(self):
        if self.values.dtype != np.int8:
            raise ConfigurationError("quantized values must be int8")

    def dequantize(self) -> np.ndarray:
        return np.ldexp(self.values.astype(np.float64), self.scale_exponent)

    @property
    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.values))


@dataclass(frozen=True)
class BnRegisters:
    """Per-channel integer affine: y = rhte((acc·multiplier + bias) >> shift)."""
    multiplier: np.ndarray       # int32, each within int16 range
    bias: np.ndarray             # int32
    shift: int


def prune_magnitude(tensor: np.ndarray, spec: PruneSpec) -> tuple[np.ndarray, float]:
    """Zero exactly floor(n·s) smallest-magnitude entries.

    Ties are broken by zeroing the lower flat index first. The achieved
    sparsity counts zeros already present in the input.
    """
    if tensor.size == 0:
        raise ConfigurationError("cannot prune an empty tensor")
    flat = np.abs(tensor.ravel())
    k = math.floor(tensor.size * spec.target_sparsity)
    out = np.array(tensor, copy=True)
    if k > 0:
        order = np.argsort(flat, kind="stable")
        out.ravel()[order[:k]] = 0
    achieved = (out.size - np.count_nonzero(out)) / out.size
    return out, achieved


def scale_exponent_for(max_abs: float, bits: int = 8) -> int:
    """Smallest integer e with max_abs / 2^e ≤ (2^(bits−1) − 1); 0 when max_abs is 0."""
    if max_abs == 0.0:
        return 0
    qmax = (1 << (bits - 1)) - 1
    e = math.ceil(math.log2(max_abs / qmax))
    # guard against log2 rounding at exact powers of two
    while math.ldexp(qmax, e) < max_abs:
        e += 1
    while e > -1074 and math.ldexp(qmax, e - 1) >= max_abs:
        e -= 1
    return e


def quantize_tensor(tensor: np.ndarray, bits: int = 8) -> QuantizedTensor:
    tensor = np.asarray(tensor, dtype=np.float64)
    if not np.all(np.isfinite(tensor)):
        raise EncodingError("cannot quantize non-finite values")
    if not 2 <= bits <= 8:
        raise ConfigurationError(f"bits must be in 2..8, got {bits}")
    e = scale_exponent_for(float(np.max(np.abs(tensor))) if tensor.size else 0.0, bits)
    qmax = (1 << (bits - 1)) - 1
    q = np.round(np.ldexp(tensor, -e))          # np.round is half-to-even
    q = np.clip(q, -(qmax + 1), qmax)
    return QuantizedTensor(q.astype(np.int8), e)


_SHIFT_MAX = 31


def prepare_bn(scale: np.ndarray, bias: np.ndarray, acc_exponent: int,
               out_exponent: int, shift: int | None = None) -> BnRegisters:
    """Lower real per-channel affine y = scale·x + bias to register values.

    The accumulator carries reals at 2^acc_exponent and the output at
    2^out_exponent, so the ideal multiplier is scale·2^(shift + acc − out)
    and the ideal bias is bias·2^(shift − out). When no shift is given, the
    largest one keeping every multiplier within int16 (targeting ~2^14) and
    every bias within int32 is chosen.
    """
    scale = np.asarray(scale, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if scale.shape != bias.shape or scale.ndim != 1:
        raise ConfigurationError("scale/bias must be matching 1-D channel vectors")

    def encode(r: int) -> tuple[np.ndarray, np.ndarray]:
        m = np.round(np.ldexp(scale, r + acc_exponent - out_exponent))
        b = np.round(np.ldexp(bias, r - out_exponent))
        return m, b

    def fits(m: np.ndarray, b: np.ndarray) -> bool:
        return (np.max(np.abs(m), initial=0) <= 2**15 - 1
                and np.max(np.abs(b), initial=0) <= 2**31 - 1)

    if shift is not None:
        if shift < 1:
            raise ConfigurationError(f"shift must be ≥ 1, got {shift}")
        m, b = encode(shift)
        if not fits(m, b):
            raise EncodingError(
                f"BN scale too large to encode at shift {shift} "
                f"(|m| up to {np.max(np.abs(m)):.0f})")
        return BnRegisters(m.astype(np.int32), b.astype(np.int32), shift)

    gmax = float(np.max(np.abs(np.ldexp(scale, acc_exponent - out_exponent)), initial=0))
    r0 = 8 if gmax == 0.0 else min(_SHIFT_MAX, 14 - math.floor(math.log2(gmax)))
    for r in range(max(r0, 1), 0, -1):
        m, b = encode(r)
        if fits(m, b):
            return BnRegisters(m.astype(np.int32), b.astype(np.int32), r)
    raise EncodingError("BN parameters too large for any shift ≥ 1")


# ------------------------------------------------- float calibration pass

def _conv_float(x: np.ndarray, layer, w: np.ndarray) -> np.ndarray:
    """SAME-padded float conv over a batch (N, H, W, C)."""
    n, h, wd, _ = x.shape
    s, k = layer.stride, layer.kernel
    pt, pb = same_padding(h, k, s)
    pl, pr = same_padding(wd, k, s)
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    h_out, w_out = layer.out_spatial(h, wd)
    out = np.zeros((n, h_out, w_out, layer.out_channels))
    for ky in range(k):
        for kx in range(k):
            patch = xp[:, ky:ky + h_out * s:s, kx:kx + w_out * s:s, :]
            if layer.kind is LayerKind.DEPTHWISE_CONV:
                out += patch * w[ky, kx]
            else:
                out += patch @ w[ky, kx]
    return out


def _float_forward(bundle: ModelBundle, x: np.ndarray) -> list[np.ndarray]:
    """Per-layer outputs of the real-valued model, for range calibration."""
    outs = []
    for i, layer in enumerate(bundle.graph.layers):
        if layer.is_conv:
            x = _conv_float(x, layer, bundle.weights[i].astype(np.float64))
            if layer.has_bn:
                scale, bias = bundle.bn_params[i]
                x = x * scale + bias
            if layer.has_relu:
                x = np.maximum(x, 0.0)
        elif layer.kind is LayerKind.AVG_POOL:
            x = x.mean(axis=(1, 2), keepdims=True)
        else:  # fully connected
            logits = x.reshape(x.shape[0], -1) @ bundle.weights[i].astype(np.float64)
            bias = bundle.fc_bias.get(i)
            if bias is not None:
                logits = logits + bias
            x = logits.reshape(x.shape[0], 1, 1, -1)
        outs.append(x)
    return outs


# ------------------------------------------------------------ frozen model

@dataclass
class FrozenModel:
    """Pruned, quantized parameters plus calibrated activation scales."""
    graph: Graph
    qweights: dict[int, QuantizedTensor]
    input_exponent: int
    act_exponents: tuple[int, ...]                    # output exponent per layer
    bn_real: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    fc_bias: dict[int, np.ndarray] = field(default_factory=dict)
    bn_shifts: dict[int, int] = field(default_factory=dict)
    bits: int = 8
    target_sparsity: float = 0.0
    achieved_sparsity: dict[int, float] = field(default_factory=dict)

    def in_exponent(self, layer_index: int) -> int:
        return self.input_exponent if layer_index == 0 \
            else self.act_exponents[layer_index - 1]

    def acc_exponent(self, layer_index: int) -> int:
        """Scale exponent of the 32-bit accumulator feeding layer i's requantizer."""
        layer = self.graph.layers[layer_index]
        e_in = self.in_exponent(layer_index)
        if layer.is_conv or layer.kind is LayerKind.FULLY_CONNECTED:
            return e_in + self.qweights[layer_index].scale_exponent
        return e_in  # avg-pool sums raw activations

    def requant_registers(self, layer_index: int,
                          bn_override: tuple[np.ndarray, np.ndarray] | None = None,
                          ) -> BnRegisters | None:
        """Integer affine for layer i's accumulator→int8 boundary.

        Conv layers without BN use an identity affine; avg-pool folds the
        window divisor into the multiplier. The FC layer keeps full-width
        logits and returns None. bn_override substitutes fresh real BN
        parameters at the frozen shift (the adaptive-BN path).
        """
        layer = self.graph.layers[layer_index]
        if layer.kind is LayerKind.FULLY_CONNECTED:
            return None
        e_acc = self.acc_exponent(layer_index)
        e_out = self.act_exponents[layer_index]
        shift = self.bn_shifts.get(layer_index)
        c = layer.out_channels
        if layer.kind is LayerKind.AVG_POOL:
            h, w = self._pool_window(layer_index)
            scale = np.full(c, 1.0 / (h * w))
            bias = np.zeros(c)
        elif layer.has_bn:
            scale, bias = bn_override if bn_override is not None \
                else self.bn_real[layer_index]
        else:
            scale, bias = np.ones(c), np.zeros(c)
        return prepare_bn(scale, bias, e_acc, e_out, shift)

    def _pool_window(self, layer_index: int) -> tuple[int, int]:
        h, w, _ = self.graph.layer_shapes()[layer_index]
        return h, w

    def fc_bias_int(self, layer_index: int) -> np.ndarray:
        """FC bias quantized to the logit scale 2^(e_in + e_w), int32."""
        e = self.acc_exponent(layer_index)
        bias = self.fc_bias.get(layer_index)
        if bias is None:
            return np.zeros(self.graph.layers[layer_index].out_channels, dtype=np.int32)
        b = np.round(np.ldexp(bias.astype(np.float64), -e))
        if np.max(np.abs(b), initial=0) > 2**31 - 1:
            raise EncodingError("FC bias overflows int32 at the logit scale")
        return b.astype(np.int32)

    def with_bn(self, layer_index: int, scale: np.ndarray, bias: np.ndarray) -> "FrozenModel":
        if not self.graph.layers[layer_index].has_bn:
            raise ConfigurationError(f"layer {layer_index} has no BN site")
        bn = dict(self.bn_real)
        bn[layer_index] = (np.asarray(scale, dtype=np.float64),
                           np.asarray(bias, dtype=np.float64))
        return FrozenModel(self.graph, self.qweights, self.input_exponent,
                           self.act_exponents, bn, self.fc_bias, self.bn_shifts,
                           self.bits, self.target_sparsity, self.achieved_sparsity)


def compress(bundle: ModelBundle, sparsity: float, bits: int = 8,
             calib: np.ndarray | None = None,
             input_exponent: int | None = None) -> FrozenModel:
    """Prune + quantize a float model into a FrozenModel.

    calib is an int8 batch (N, H, W, C) or a single image (H, W, C) used
    for max-abs activation calibration; its values are taken as reals at
    2^input_exponent (default: fitted to the batch itself).
    """
    bundle.validate()
    graph = bundle.graph
    spec = PruneSpec(sparsity)
    if calib is None:
        raise ConfigurationError("activation calibration batch is required")
    calib = np.asarray(calib)
    if calib.ndim == 3:
        calib = calib[None]
    if calib.ndim != 4 or calib.shape[1:] != graph.input_shape:
        raise ConfigurationError(
            f"calibration batch shape {calib.shape} does not match input "
            f"{graph.input_shape}")
    if input_exponent is None:
        input_exponent = scale_exponent_for(float(np.max(np.abs(calib))), bits)

    pruned = ModelBundle(graph, {}, bundle.bn_params, bundle.fc_bias)
    qweights: dict[int, QuantizedTensor] = {}
    achieved: dict[int, float] = {}
    for i, w in bundle.weights.items():
        pw, sp = prune_magnitude(w, spec)
        pruned.weights[i] = pw
        achieved[i] = sp
        qweights[i] = quantize_tensor(pw, bits)

    x = np.ldexp(calib.astype(np.float64), input_exponent)
    layer_outs = _float_forward(pruned, x)
    act_exponents = []
    for i, (layer, out) in enumerate(zip(graph.layers, layer_outs)):
        if layer.kind is LayerKind.FULLY_CONNECTED:
            # logits stay at accumulator scale; recorded for completeness
            e = input_exponent if i == 0 else act_exponents[i - 1]
            act_exponents.append(e + qweights[i].scale_exponent)
        else:
            act_exponents.append(
                scale_exponent_for(float(np.max(np.abs(out))), bits))

    frozen = FrozenModel(graph, qweights, input_exponent, tuple(act_exponents),
                         {i: (s.astype(np.float64), b.astype(np.float64))
                          for i, (s, b) in bundle.bn_params.items()},
                         {i: b.astype(np.float64) for i, b in bundle.fc_bias.items()},
                         {}, bits, sparsity, achieved)
    for i, layer in enumerate(graph.layers):
        if layer.kind is not LayerKind.FULLY_CONNECTED:
            frozen.bn_shifts[i] = frozen.requant_registers(i).shift
    return frozen


# ------------------------------------------------------------- persistence

def save_frozen(manifest_path: str | Path, frozen: FrozenModel,
                blob_filename: str | None = None) -> Path:
    manifest_path = Path(manifest_path)
    if blob_filename is None:
        blob_filename = manifest_path.stem + ".fxnn"
    records: list[tuple[int, int, np.ndarray, int | None]] = []
    for i, qt in sorted(frozen.qweights.items()):
        records.append((i, formats.ROLE_WEIGHT, qt.values, qt.scale_exponent))
    for i, (scale, bias) in sorted(frozen.bn_real.items()):
        records.append((i, formats.ROLE_BN_SCALE, scale.astype(np.float32), None))
        records.append((i, formats.ROLE_BN_BIAS, bias.astype(np.float32), None))
    for i, bias in sorted(frozen.fc_bias.items()):
        records.append((i, formats.ROLE_FC_BIAS, bias.astype(np.float32), None))
    formats.write_blob(manifest_path.parent / blob_filename, records)
    quant = {
        "bits": frozen.bits,
        "input_exponent": frozen.input_exponent,
        "activation_exponents": list(frozen.act_exponents),
        "bn_shifts": {str(i): r for i, r in sorted(frozen.bn_shifts.items())},
        "target_sparsity": frozen.target_sparsity,
        "achieved_sparsity": {str(i): s for i, s in sorted(frozen.achieved_sparsity.items())},
    }
    formats.write_manifest(manifest_path, frozen.graph, blob_filename, quant)
    return manifest_path


def load_frozen(manifest_path: str | Path) -> FrozenModel:
    manifest_path = Path(manifest_path)
    graph, blob_name, quant = formats.read_manifest(manifest_path)
    if quant is None:
        raise formats.FormatError(f"{manifest_path}: not a frozen model (no quantization section)")
    qweights: dict[int, QuantizedTensor] = {}
    bn_scale: dict[int, np.ndarray] = {}
    bn_bias: dict[int, np.ndarray] = {}
    fc_bias: dict[int, np.ndarray] = {}
    for layer_index, role, arr, exponent in formats.read_blob(manifest_path.parent / blob_name):
        if role == formats.ROLE_WEIGHT:
            if exponent is None:
                raise formats.FormatError("frozen weight record lacks a scale exponent")
            qweights[layer_index] = QuantizedTensor(arr, exponent)
        elif role == formats.ROLE_BN_SCALE:
            bn_scale[layer_index] = arr.astype(np.float64)
        elif role == formats.ROLE_BN_BIAS:
            bn_bias[layer_index] = arr.astype(np.float64)
        elif role == formats.ROLE_FC_BIAS:
            fc_bias[layer_index] = arr.astype(np.float64)
        else:
            raise formats.FormatError(f"unknown record role {role}")
    if set(bn_scale) != set(bn_bias):
        raise formats.FormatError("bn_scale/bn_bias records do not pair up")
    frozen = FrozenModel(
        graph, qweights,
        int(quant["input_exponent"]),
        tuple(int(e) for e in quant["activation_exponents"]),
        {i: (bn_scale[i], bn_bias[i]) for i in bn_scale},
        fc_bias,
        {int(i): int(r) for i, r in quant.get("bn_shifts", {}).items()},
        int(quant.get("bits", 8)),
        float(quant.get("target_sparsity", 0.0)),
        {int(i): float(s) for i, s in quant.get("achieved_sparsity", {}).items()},
    )
    for i, layer in enumerate(graph.layers):
        if layer.weight_shape() is not None and i not in qweights:
            raise formats.FormatError(f"layer {i}: missing quantized weights")
        if layer.has_bn and i not in frozen.bn_real:
            raise formats.FormatError(f"layer {i}: missing BN parameters")
    return frozen
