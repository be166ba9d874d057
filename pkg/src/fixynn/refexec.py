"""Golden integer executor.

Runs quantized inference over the Graph with fully specified integer
semantics; this module is the normative definition of what any generated
datapath must compute, bit for bit:

  * int8 × int8 products accumulate into a checked 32-bit accumulator
    (overflow raises, never wraps);
  * the accumulator passes through the per-channel integer affine
    t = acc·m + b, is rounded half-to-even by an arithmetic shift of r,
    clamped to the activation range, then optionally rectified;
  * padding is SAME with literal zeros; stride-2 samples the
    top-left-aligned grid; avg-pool folds its divisor into the affine;
  * the final FC layer emits full-width int32 logits (accumulator plus
    bias at the logit scale) with no requantization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compress import BnRegisters, FrozenModel
from .model import ConfigurationError, LayerKind, same_padding

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1


class AccumulatorOverflow(ArithmeticError):
    """A 32-bit accumulator (or 64-bit requantizer intermediate) overflowed."""


@dataclass(frozen=True)
class ActivationTensor:
    values: np.ndarray           # int8, (H, W, C)
    scale_exponent: int

    def __post_init__(self):
        if self.values.dtype != np.int8 or self.values.ndim != 3:
            raise ConfigurationError("activations must be int8 with dims (H, W, C)")


def rhte_shift(t, shift: int):
    """Arithmetic right shift with round-half-to-even tie breaking.

    Works elementwise on int64 arrays and exactly on Python ints.
    """
    if shift < 0:
        raise ConfigurationError(f"shift must be >= 0, got {shift}")
    if shift == 0:
        return t
    shifted = t >> shift
    rem = t - (shifted << shift)
    half = 1 << (shift - 1)
    if isinstance(t, np.ndarray):
        up = (rem > half) | ((rem == half) & ((shifted & 1) == 1))
        return shifted + up.astype(shifted.dtype)
    return int(shifted) + int(rem > half or (rem == half and shifted & 1))


def requantize(acc, mul: int, shift: int, lo: int = -128, hi: int = 127):
    """clamp(round-half-to-even((acc × mul) / 2^shift)) into [lo, hi]."""
    if isinstance(acc, np.ndarray):
        a = acc.astype(np.int64)
        bound = int(np.max(np.abs(a), initial=0)) * abs(int(mul))
        if bound >= 2**63:
            raise AccumulatorOverflow("acc × mul exceeds the 64-bit intermediate")
        return np.clip(rhte_shift(a * np.int64(mul), shift), lo, hi).astype(np.int8)
    t = int(acc) * int(mul)
    if not -(2**63) <= t < 2**63:
        raise AccumulatorOverflow("acc × mul exceeds the 64-bit intermediate")
    return int(min(max(rhte_shift(t, shift), lo), hi))


def affine_requant(acc: np.ndarray, regs: BnRegisters, lo: int, hi: int,
                   relu: bool) -> np.ndarray:
    """Per-channel (acc·m + b) >> r with RHTE, clamp, optional ReLU."""
    t = acc.astype(np.int64) * regs.multiplier.astype(np.int64) \
        + regs.bias.astype(np.int64)
    y = np.clip(rhte_shift(t, regs.shift), lo, hi)
    if relu:
        y = np.maximum(y, 0)
    return y.astype(np.int8)


def _check_acc(acc: np.ndarray, layer_index: int) -> np.ndarray:
    if acc.size and (acc.max() > INT32_MAX or acc.min() < INT32_MIN):
        raise AccumulatorOverflow(
            f"layer {layer_index}: accumulator exceeds 32 bits "
            f"(range [{acc.min()}, {acc.max()}])")
    return acc


def conv_accumulate(x: np.ndarray, layer, weights: np.ndarray) -> np.ndarray:
    """Integer SAME-padded convolution, returning the int64 accumulator grid."""
    h, w, _ = x.shape
    k, s = layer.kernel, layer.stride
    pt, pb = same_padding(h, k, s)
    pl, pr = same_padding(w, k, s)
    h_out, w_out = layer.out_spatial(h, w)
    xp = np.zeros((pt + h + pb, pl + w + pr, x.shape[2]), dtype=np.int64)
    xp[pt:pt + h, pl:pl + w] = x
    wq = weights.astype(np.int64)
    acc = np.zeros((h_out, w_out, layer.out_channels), dtype=np.int64)
    for ky in range(k):
        for kx in range(k):
            patch = xp[ky:ky + h_out * s:s, kx:kx + w_out * s:s, :]
            if layer.kind is LayerKind.DEPTHWISE_CONV:
                acc += patch * wq[ky, kx]
            else:
                acc += patch @ wq[ky, kx]
    return acc


@dataclass(frozen=True)
class InferResult:
    activations: tuple[ActivationTensor | None, ...]   # None at the FC slot
    logits: np.ndarray                                  # int32


def _as_activation(frozen: FrozenModel, image) -> np.ndarray:
    if isinstance(image, ActivationTensor):
        if image.scale_exponent != frozen.input_exponent:
            raise ConfigurationError(
                f"input exponent {image.scale_exponent} does not match the "
                f"model's calibrated {frozen.input_exponent}")
        image = image.values
    image = np.asarray(image)
    if image.dtype != np.int8:
        raise ConfigurationError(f"input must be int8, got {image.dtype}")
    if image.shape != frozen.graph.input_shape:
        raise ConfigurationError(
            f"input shape {image.shape} does not match {frozen.graph.input_shape}")
    return image


def infer(frozen: FrozenModel, image,
          register_override: dict[int, BnRegisters] | None = None,
          stop_after: int | None = None) -> InferResult:
    """Run the integer model; register_override substitutes BN register
    values per layer index (the hardware reprogramming path)."""
    x = _as_activation(frozen, image)
    override = register_override or {}
    lo, hi = -(1 << (frozen.bits - 1)), (1 << (frozen.bits - 1)) - 1
    acts: list[ActivationTensor | None] = []
    logits = np.zeros(0, dtype=np.int32)
    for i, layer in enumerate(frozen.graph.layers):
        if layer.is_conv:
            acc = _check_acc(conv_accumulate(x, layer, frozen.qweights[i].values), i)
            regs = override.get(i) or frozen.requant_registers(i)
            x = affine_requant(acc, regs, lo, hi, layer.has_relu)
            acts.append(ActivationTensor(x, frozen.act_exponents[i]))
        elif layer.kind is LayerKind.AVG_POOL:
            acc = _check_acc(
                x.astype(np.int64).sum(axis=(0, 1), keepdims=True), i)
            regs = override.get(i) or frozen.requant_registers(i)
            x = affine_requant(acc, regs, lo, hi, layer.has_relu)
            acts.append(ActivationTensor(x, frozen.act_exponents[i]))
        else:
            vec = x.reshape(-1).astype(np.int64)
            acc = vec @ frozen.qweights[i].values.astype(np.int64)
            logits64 = acc + frozen.fc_bias_int(i).astype(np.int64)
            _check_acc(logits64, i)
            logits = logits64.astype(np.int32)
            acts.append(None)
        if stop_after is not None and i >= stop_after:
            break
    return InferResult(tuple(acts), logits)


def tap(frozen: FrozenModel, image, k: int,
        register_override: dict[int, BnRegisters] | None = None) -> ActivationTensor:
    """Activations at prefix-unit boundary k (1-based)."""
    units = frozen.graph.prefix_units()
    if not 1 <= k <= len(units):
        raise ConfigurationError(f"tap boundary {k} out of range 1..{len(units)}")
    last = units[k - 1][-1]
    result = infer(frozen, image, register_override, stop_after=last)
    out = result.activations[last]
    assert out is not None
    return out
