"""Fixed-weight CNN front-end toolchain.

Lower the leading layers of a pruned, quantized CNN into a fully
pipelined fixed-weight datapath: golden integer execution, netlist
freezing, Verilog emission, cycle-level simulation, and an analytical
PPA model with a programmable-back-end design-space sweep.
"""

from .compress import (BnRegisters, EncodingError, FrozenModel, PruneSpec,
                       QuantizedTensor, compress, load_frozen, prepare_bn,
                       prune_magnitude, quantize_tensor, save_frozen)
from .model import (ConfigurationError, Graph, LayerKind, LayerSpec,
                    ModelBundle, build_mobilenet, count_macs, count_params,
                    fixed_ops_fraction, random_bundle)
from .netlist import (FreezeSpec, Netlist, Stage, freeze, load_netlist,
                      pipeline_stats, save_netlist)
from .ppa import (CostConfig, InfeasibleAreaError, PUBLISHED_NVDLA, PpaReport,
                  ffe_ppa, load_cost_config, load_nvdla_table, nvdla_point,
                  system_ppa)
from .refexec import AccumulatorOverflow, infer, requantize, rhte_shift, tap
from .rtl import emit_testbench, emit_verilog, write_files
from .sim import DatapathSimulator, check_equivalence, simulate
from .dse import pareto, sweep

__version__ = "0.1.0"

__all__ = [
    "AccumulatorOverflow", "BnRegisters", "ConfigurationError", "CostConfig",
    "DatapathSimulator", "EncodingError", "FreezeSpec", "FrozenModel",
    "Graph", "InfeasibleAreaError", "LayerKind", "LayerSpec", "ModelBundle",
    "Netlist", "PUBLISHED_NVDLA", "PpaReport", "PruneSpec", "QuantizedTensor",
    "Stage", "build_mobilenet", "check_equivalence", "compress", "count_macs",
    "count_params", "emit_testbench", "emit_verilog", "ffe_ppa",
    "fixed_ops_fraction", "freeze", "infer", "load_cost_config", "load_frozen",
    "load_netlist", "load_nvdla_table", "nvdla_point", "pareto",
    "pipeline_stats", "prepare_bn", "prune_magnitude", "quantize_tensor",
    "random_bundle", "requantize", "rhte_shift", "save_frozen",
    "save_netlist", "simulate", "sweep", "system_ppa", "tap", "write_files",
]
