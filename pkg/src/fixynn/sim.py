"""Cycle-level functional simulator for datapath netlists.

Executes the structural description — virtual padded-grid walk over line
buffers/window taps, the constant-coefficient multiplier list, per-channel
adder trees, the BN register file, requantizers — rather than the source
Graph, so agreement with the reference executor is evidence the generated
hardware computes the right function. Stage-accurate, not gate-accurate:
cycle counts come from the netlist's latency/interval model.

The BN register file is the only writable state; load_bn models the
hardware write port and is rejected on netlists frozen with baked BN.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ConfigurationError
from .netlist import Netlist, Stage
from .refexec import AccumulatorOverflow, INT32_MAX, INT32_MIN, rhte_shift
from . import refexec


@dataclass(frozen=True)
class FrameResult:
    output: np.ndarray                 # int8, final stage output (or passthrough)
    taps: dict[int, np.ndarray]        # boundary -> int8 tensor
    cycles: int


@dataclass(frozen=True)
class EquivalenceReport:
    passed: bool
    trials: int
    mismatch: dict | None = None
    warning: str | None = None

    def __str__(self):
        if self.warning and self.passed:
            return f"PASS (vacuous): {self.warning}"
        if self.passed:
            return f"PASS: {self.trials} trials, outputs and taps bit-exact"
        m = self.mismatch
        return (f"FAIL: trial {m['trial']}, {m['port']} at index {m['index']}: "
                f"datapath {m['got']} != reference {m['want']}")


def _coeff_matrix(stage: Stage) -> np.ndarray:
    """(out_channels, k·k·C_in) constant matrix assembled from the
    multiplier list; positions with no multiplier stay zero."""
    m = np.zeros((stage.out_channels, stage.kernel * stage.kernel * stage.in_channels),
                 dtype=np.int64)
    for mult in stage.multipliers:
        col = (mult.ky * stage.kernel + mult.kx) * stage.in_channels + mult.in_channel
        if m[mult.out_channel, col] != 0:
            raise ConfigurationError(
                f"stage {stage.layer_index}: duplicate multiplier at tap "
                f"({mult.ky},{mult.kx},{mult.in_channel})->{mult.out_channel}")
        m[mult.out_channel, col] = mult.weight
    return m


def _gather_windows(stage: Stage, x: np.ndarray) -> np.ndarray:
    """(out_pixels, k·k·C_in) window contents for every output pixel,
    with SAME-padding zeros supplied at the boundary."""
    k, s = stage.kernel, stage.stride
    grid_h = stage.pad_top + stage.in_h + max((stage.out_h - 1) * s + k
                                              - stage.pad_top - stage.in_h, 0)
    grid_w = stage.pad_left + stage.in_w + max((stage.out_w - 1) * s + k
                                               - stage.pad_left - stage.in_w, 0)
    grid = np.zeros((grid_h, grid_w, stage.in_channels), dtype=np.int64)
    grid[stage.pad_top:stage.pad_top + stage.in_h,
         stage.pad_left:stage.pad_left + stage.in_w] = x
    cols = []
    for ky in range(k):
        for kx in range(k):
            cols.append(grid[ky:ky + stage.out_h * s:s, kx:kx + stage.out_w * s:s, :]
                        .reshape(stage.out_pixels, stage.in_channels))
    return np.concatenate(cols, axis=1)


class DatapathSimulator:
    """Holds one netlist plus the current BN register-file contents."""

    def __init__(self, netlist: Netlist):
        self.netlist = netlist
        self._coeffs = [_coeff_matrix(s) for s in netlist.stages]
        self._bn_mult = [np.array(s.bn_multiplier, dtype=np.int64) for s in netlist.stages]
        self._bn_bias = [np.array(s.bn_bias, dtype=np.int64) for s in netlist.stages]
        self._frames_run = 0

    def load_bn(self, stage_index: int, multiplier, bias) -> None:
        """Write the BN register file of one stage (the adaptive-BN port)."""
        if not self.netlist.bn_programmable:
            raise ConfigurationError("netlist was frozen with baked BN constants")
        stage = self.netlist.stages[stage_index]
        multiplier = np.asarray(multiplier, dtype=np.int64)
        bias = np.asarray(bias, dtype=np.int64)
        if multiplier.shape != (stage.out_channels,) or bias.shape != (stage.out_channels,):
            raise ConfigurationError(
                f"stage {stage_index}: register file holds {stage.out_channels} channels")
        if np.max(np.abs(multiplier), initial=0) >= 2**15:
            raise ConfigurationError("BN multiplier out of int16 register range")
        if np.max(np.abs(bias), initial=0) > 2**31 - 1:
            raise ConfigurationError("BN bias out of int32 register range")
        self._bn_mult[stage_index] = multiplier
        self._bn_bias[stage_index] = bias

    def run_frame(self, image: np.ndarray) -> FrameResult:
        nl = self.netlist
        image = np.asarray(image)
        if image.dtype != np.int8:
            raise ConfigurationError(f"input must be int8, got {image.dtype}")
        if image.shape != (nl.input_h, nl.input_w, nl.input_channels):
            raise ConfigurationError(
                f"input shape {image.shape}, netlist expects "
                f"{(nl.input_h, nl.input_w, nl.input_channels)}")
        lo, hi = -(1 << (nl.bits - 1)), (1 << (nl.bits - 1)) - 1
        tap_of_stage = {t.stage_index: t.boundary for t in nl.taps}
        x = image.astype(np.int64)
        taps: dict[int, np.ndarray] = {}
        for si, stage in enumerate(nl.stages):
            windows = _gather_windows(stage, x)
            acc = windows @ self._coeffs[si].T            # adder tree per channel
            if acc.size and (acc.max() > INT32_MAX or acc.min() < INT32_MIN):
                raise AccumulatorOverflow(
                    f"stage {si} (layer {stage.layer_index}): accumulator "
                    f"exceeds 32 bits")
            t = acc * self._bn_mult[si] + self._bn_bias[si]
            y = np.clip(rhte_shift(t, stage.bn_shift), lo, hi)
            if stage.relu:
                y = np.maximum(y, 0)
            x = y.reshape(stage.out_h, stage.out_w, stage.out_channels)
            if si in tap_of_stage:
                taps[tap_of_stage[si]] = x.astype(np.int8)
        cycles = nl.frame_interval
        if self._frames_run == 0:
            cycles += nl.pipeline_depth
        if not nl.stages:
            cycles = 0
        self._frames_run += 1
        return FrameResult(x.astype(np.int8), taps, cycles)

    @property
    def steady_interval(self) -> int:
        return self.netlist.frame_interval


def simulate(netlist: Netlist, images) -> list[FrameResult]:
    """Run a stream of frames through a fresh simulator instance."""
    images = np.asarray(images)
    if images.ndim == 3:
        images = images[None]
    simulator = DatapathSimulator(netlist)
    return [simulator.run_frame(frame) for frame in images]


def check_equivalence(netlist: Netlist, frozen, trials: int, seed: int) -> EquivalenceReport:
    """Drive `trials` random frames through the datapath and the reference
    executor; exact comparison at the final output and every tap port."""
    if trials == 0:
        return EquivalenceReport(True, 0, warning="0 trials requested — nothing checked")
    rng = np.random.default_rng(seed)
    simulator = DatapathSimulator(netlist)
    nl_in = (netlist.input_h, netlist.input_w, netlist.input_channels)
    stop = netlist.stages[-1].layer_index if netlist.stages else None
    for trial in range(trials):
        image = rng.integers(-128, 128, size=nl_in, dtype=np.int8)
        frame = simulator.run_frame(image)
        if stop is None:
            want_out = image
        else:
            trace = refexec.infer(frozen, image, stop_after=stop)
            want_out = trace.activations[stop].values
        ports = [("output", frame.output, want_out)]
        for t in netlist.taps:
            li = netlist.stages[t.stage_index].layer_index
            want_tap = trace.activations[li].values
            ports.append((f"tap[{t.boundary}]", frame.taps[t.boundary], want_tap))
        for port, got, want in ports:
            if got.shape != want.shape:
                return EquivalenceReport(False, trials, {
                    "trial": trial, "port": port, "index": None,
                    "got": list(got.shape), "want": list(want.shape)})
            diff = np.nonzero(got != want)
            if diff[0].size:
                idx = tuple(int(d[0]) for d in diff)
                return EquivalenceReport(False, trials, {
                    "trial": trial, "port": port, "index": idx,
                    "got": int(got[idx]), "want": int(want[idx])})
    return EquivalenceReport(True, trials)
