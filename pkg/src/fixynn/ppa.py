"""Analytical power-performance-area model.

Three layers:
  * ffe_ppa — area/power/throughput of a fixed-weight pipeline from its
    structural counts and per-unit cost constants;
  * nvdla_point — the programmable back-end, modeled purely by piecewise
    linear interpolation over the published six-row configuration table;
  * system_ppa — front-end + back-end composition under perfect clock
    gating (the front-end burns power only while busy).

Cost constants are calibrated so that the default configuration places the
MobileNet-0.25 front-end at three anchor areas obtained by inverting the
published system-level table through the back-end interpolation (see
scripts/calibrate_cost_model.py, which re-derives them). Throughput
composition is tight; energy constants are calibrated-approximate — the
published data under-determines the front-end energy model.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

from .model import ConfigurationError
from .netlist import Netlist, PipelineStats, pipeline_stats


class InfeasibleAreaError(ValueError):
    """Requested back-end area is below the smallest published config."""


# Constants produced by scripts/calibrate_cost_model.py: max-margin fit of
# (a_mult, a_reg, a_sram) against the three inverted-table area anchors with
# a_add tied to a_mult/4, energy scaled so the duty-cycled front-end draws
# ~8.5 mW at the deepest anchor (well under 10% of system power). These are
# effective calibration values, not process numbers; override via config
# file for a real node.
_DEFAULTS = {
    "f_clk": 810e6,
    "a_mult": 9.363776e-06,    # mm^2 per constant-coefficient multiplier
    "a_add": 2.340944e-06,     # mm^2 per adder
    "a_reg": 1.000000e-08,     # mm^2 per register bit
    "a_sram": 3.973895e-06,    # mm^2 per line-buffer bit
    "e_mult": 4.132187e-16,    # J per multiply
    "e_add": 1.033047e-16,     # J per add
    "e_reg": 6.886978e-18,     # J per register/SRAM bit-toggle
    "p_leak": 2.0e-3,          # W per mm^2
}


@dataclass(frozen=True)
class CostConfig:
    f_clk: float = _DEFAULTS["f_clk"]
    a_mult: float = _DEFAULTS["a_mult"]
    a_add: float = _DEFAULTS["a_add"]
    a_reg: float = _DEFAULTS["a_reg"]
    a_sram: float = _DEFAULTS["a_sram"]
    e_mult: float = _DEFAULTS["e_mult"]
    e_add: float = _DEFAULTS["e_add"]
    e_reg: float = _DEFAULTS["e_reg"]
    p_leak: float = _DEFAULTS["p_leak"]
    preset: str = "default-16nm"

    def __post_init__(self):
        for name in ("f_clk", "a_mult", "a_add", "a_reg", "a_sram",
                     "e_mult", "e_add", "e_reg", "p_leak"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"cost constant {name} must be positive")


@dataclass(frozen=True)
class NvdlaRow:
    name: str
    macs: int
    buffer_kb: int
    area_mm2: float
    tops: float
    tops_per_w: float


@dataclass(frozen=True)
class NvdlaTable:
    rows: tuple[NvdlaRow, ...]

    def __post_init__(self):
        if len(self.rows) < 2:
            raise ConfigurationError("back-end table needs at least two rows")
        for a, b in zip(self.rows, self.rows[1:]):
            if not (b.area_mm2 > a.area_mm2 and b.tops > a.tops):
                raise ConfigurationError(
                    "back-end table must be strictly increasing in area and TOPS")

    @property
    def min_area(self) -> float:
        return self.rows[0].area_mm2

    @property
    def max_area(self) -> float:
        return self.rows[-1].area_mm2


PUBLISHED_NVDLA = NvdlaTable((
    NvdlaRow("A", 64, 128, 0.55, 0.056, 2.0),
    NvdlaRow("B", 128, 256, 0.84, 0.156, 3.8),
    NvdlaRow("C", 256, 256, 1.00, 0.358, 5.6),
    NvdlaRow("D", 512, 256, 1.40, 0.728, 6.8),
    NvdlaRow("E", 1024, 256, 1.80, 1.166, 6.3),
    NvdlaRow("F", 2048, 512, 3.30, 2.095, 5.4),
))


@dataclass(frozen=True)
class BackendPoint:
    area_mm2: float
    tops: float
    tops_per_w: float


@dataclass(frozen=True)
class PpaReport:
    area_mm2: float
    power_w: float
    tops: float
    tops_per_w: float
    frame_rate: float
    latency_cycles: int

    def __post_init__(self):
        for name in ("area_mm2", "power_w", "tops", "tops_per_w", "frame_rate"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")


ZERO_REPORT = PpaReport(0.0, 0.0, 0.0, 0.0, 0.0, 0)


def ffe_ppa(netlist: Netlist, stats: PipelineStats | None = None,
            cost: CostConfig | None = None) -> PpaReport:
    """Front-end PPA from structural counts.

    Throughput counts ops as 2 × dense MACs — pruned positions are
    delivered implicitly by the hardware, so sparsity raises efficiency
    without lowering the advertised rate.
    """
    stats = stats if stats is not None else pipeline_stats(netlist)
    cost = cost if cost is not None else CostConfig()
    if stats.max_stage_pixels == 0:
        return ZERO_REPORT
    area = (cost.a_mult * stats.multipliers + cost.a_add * stats.adders
            + cost.a_reg * stats.register_bits + cost.a_sram * stats.line_buffer_bits)
    frame_rate = cost.f_clk / stats.max_stage_pixels
    tops = 2.0 * netlist.dense_macs * frame_rate / 1e12
    energy_per_cycle = (cost.e_mult * stats.multipliers + cost.e_add * stats.adders
                        + cost.e_reg * (stats.register_bits + stats.line_buffer_bits))
    power = cost.f_clk * 0.5 * energy_per_cycle + cost.p_leak * area
    return PpaReport(area, power, tops, tops / power if power > 0 else 0.0,
                     frame_rate, stats.pipeline_depth)


def nvdla_point(area_mm2: float, table: NvdlaTable = PUBLISHED_NVDLA) -> BackendPoint:
    """Back-end operating point at a silicon area, by piecewise-linear
    interpolation of the published rows. Exact at row areas; areas above
    the largest config clamp to it with a warning."""
    if area_mm2 < table.min_area:
        raise InfeasibleAreaError(
            f"{area_mm2:.3f} mm² is below the smallest published config "
            f"({table.rows[0].name}, {table.min_area} mm²)")
    if area_mm2 > table.max_area:
        warnings.warn(
            f"area {area_mm2:.3f} mm² exceeds config {table.rows[-1].name}; "
            f"clamping to {table.max_area} mm²", stacklevel=2)
        last = table.rows[-1]
        return BackendPoint(last.area_mm2, last.tops, last.tops_per_w)
    for lo, hi in zip(table.rows, table.rows[1:]):
        if lo.area_mm2 <= area_mm2 <= hi.area_mm2:
            t = (area_mm2 - lo.area_mm2) / (hi.area_mm2 - lo.area_mm2)
            return BackendPoint(area_mm2,
                                lo.tops + t * (hi.tops - lo.tops),
                                lo.tops_per_w + t * (hi.tops_per_w - lo.tops_per_w))
    raise AssertionError("unreachable")


def backend_area_for_tops(tops: float, table: NvdlaTable = PUBLISHED_NVDLA) -> float:
    """Inverse of nvdla_point on the throughput axis (used for calibration)."""
    if not table.rows[0].tops <= tops <= table.rows[-1].tops:
        raise InfeasibleAreaError(f"{tops} TOPS outside the published range")
    for lo, hi in zip(table.rows, table.rows[1:]):
        if lo.tops <= tops <= hi.tops:
            t = (tops - lo.tops) / (hi.tops - lo.tops)
            return lo.area_mm2 + t * (hi.area_mm2 - lo.area_mm2)
    raise AssertionError("unreachable")


def system_ppa(ffe: PpaReport, f: float, backend: BackendPoint) -> PpaReport:
    """Compose front-end + back-end.

    The back-end must deliver the remaining (1−f) share, so system
    throughput is backend/(1−f), capped by the front-end's own rate on its
    f share. Perfect clock gating scales front-end power by its duty
    factor. The published table carries no latency data, so the composed
    latency is the front-end pipeline fill alone.
    """
    if not 0.0 <= f < 1.0:
        raise ConfigurationError(f"fixed-ops fraction must be in [0, 1), got {f}")
    backend_power = backend.tops / backend.tops_per_w
    if f == 0.0:
        return PpaReport(ffe.area_mm2 + backend.area_mm2, backend_power,
                         backend.tops, backend.tops_per_w, 0.0, 0)
    system_tops = min(backend.tops / (1.0 - f), ffe.tops / f)
    duty = (f * system_tops / ffe.tops) if ffe.tops > 0 else 0.0
    power = backend_power + duty * ffe.power_w
    return PpaReport(
        ffe.area_mm2 + backend.area_mm2,
        power,
        system_tops,
        system_tops / power if power > 0 else 0.0,
        ffe.frame_rate * duty,
        ffe.latency_cycles,
    )


# ----------------------------------------------------------- config files

_COST_KEYS = {"f_clk", "a_mult", "a_add", "a_reg", "a_sram",
              "e_mult", "e_add", "e_reg", "p_leak", "preset"}


def load_cost_config(path: str | Path) -> CostConfig:
    """CostConfig from a TOML or JSON file; unknown keys rejected."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".toml":
        try:
            import tomllib
        except ImportError:                      # python 3.10
            import tomli as tomllib
        doc = tomllib.loads(text)
    else:
        doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: expected a table of cost constants")
    unknown = set(doc) - _COST_KEYS
    if unknown:
        raise ConfigurationError(f"{path}: unknown cost keys {sorted(unknown)}")
    return CostConfig(**doc)


def load_nvdla_table(path: str | Path) -> NvdlaTable:
    doc = json.loads(Path(path).read_text())
    rows = tuple(NvdlaRow(str(r["name"]), int(r["macs"]), int(r["buffer_kb"]),
                          float(r["area_mm2"]), float(r["tops"]),
                          float(r["tops_per_w"]))
                 for r in doc["rows"])
    return NvdlaTable(rows)
