"""Command-line entry point.

Subcommands: model {info,build}, compress, run, freeze, sim, emit-rtl,
ppa, dse. Every command exits 0 on success, 1 on user error (bad
arguments, malformed files, infeasible requests, failed equivalence), and
2 on internal error. --json switches reports to machine-readable output.
FIXYNN_COST_CONFIG names a default cost-config file for ppa/dse.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dse as dse_mod
from . import formats, netlist as netlist_mod, ppa as ppa_mod, rtl, sim as sim_mod
from .compress import EncodingError, compress, load_frozen, save_frozen
from .model import (ConfigurationError, build_mobilenet, count_macs,
                    count_params, fixed_ops_fraction, random_bundle)
from .refexec import AccumulatorOverflow, infer, tap

USER_ERROR = 1
INTERNAL_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USER_ERROR)


def _build_parser() -> _Parser:
    p = _Parser(prog="fixynn",
                description="Fixed-weight CNN front-end toolchain: quantize, "
                            "freeze, emit Verilog, verify, explore PPA.")
    sub = p.add_subparsers(dest="command", metavar="command")

    model = sub.add_parser("model", help="model inspection and construction")
    model_sub = model.add_subparsers(dest="model_command", metavar="subcommand")
    info = model_sub.add_parser("info", help="print the MAC/parameter table")
    info.add_argument("manifest")
    info.add_argument("--json", action="store_true")
    info.set_defaults(func=cmd_model_info)
    build = model_sub.add_parser("build", help="build a seeded random-weight model")
    build.add_argument("--width", type=float, default=0.25,
                       choices=[0.25, 0.5, 0.75, 1.0])
    build.add_argument("--resolution", type=int, default=224)
    build.add_argument("--classes", type=int, default=1000)
    build.add_argument("--seed", type=int, default=0)
    build.add_argument("-o", "--output", required=True, metavar="MANIFEST")
    build.set_defaults(func=cmd_model_build)

    comp = sub.add_parser("compress", help="prune + quantize into a frozen model")
    comp.add_argument("model")
    comp.add_argument("--sparsity", type=float, default=0.5)
    comp.add_argument("--bits", type=int, default=8)
    comp.add_argument("--calib", required=True, metavar="TENSOR",
                      help="int8 calibration batch (raw tensor file)")
    comp.add_argument("--input-exponent", type=int, default=None)
    comp.add_argument("-o", "--output", default=None, metavar="MANIFEST")
    comp.add_argument("--json", action="store_true")
    comp.set_defaults(func=cmd_compress)

    run = sub.add_parser("run", help="golden integer inference")
    run.add_argument("frozen")
    run.add_argument("--input", required=True, metavar="TENSOR")
    run.add_argument("--dump-taps", action="store_true",
                     help="write activations at every prefix boundary")
    run.add_argument("--out-dir", default=".")
    run.add_argument("--json", action="store_true")
    run.set_defaults(func=cmd_run)

    frz = sub.add_parser("freeze", help="lower a prefix into a datapath netlist")
    frz.add_argument("frozen")
    frz.add_argument("-N", "--n-fixed", type=int, required=True)
    frz.add_argument("--tap", type=int, action="append", default=[],
                     help="expose a tap at this prefix boundary (repeatable)")
    frz.add_argument("--adaptive-bn", action=argparse.BooleanOptionalAction,
                     default=True, help="writable BN registers (default on)")
    frz.add_argument("-o", "--output", default="netlist.json")
    frz.add_argument("--json", action="store_true")
    frz.set_defaults(func=cmd_freeze)

    simp = sub.add_parser("sim", help="simulate a netlist / check equivalence")
    simp.add_argument("netlist")
    simp.add_argument("--input", default=None, metavar="TENSOR")
    simp.add_argument("--output", default=None, metavar="TENSOR",
                      help="where to write the simulated output frame")
    simp.add_argument("--check-against", default=None, metavar="FROZEN")
    simp.add_argument("--trials", type=int, default=100)
    simp.add_argument("--seed", type=int, default=7)
    simp.add_argument("--json", action="store_true")
    simp.set_defaults(func=cmd_sim)

    emit = sub.add_parser("emit-rtl", help="emit Verilog + self-checking testbench")
    emit.add_argument("netlist")
    emit.add_argument("-o", "--output", required=True, metavar="DIR")
    emit.add_argument("--tb-vectors", type=int, default=100)
    emit.add_argument("--seed", type=int, default=42)
    emit.set_defaults(func=cmd_emit_rtl)

    pp = sub.add_parser("ppa", help="front-end PPA report from a netlist")
    pp.add_argument("netlist")
    pp.add_argument("--cost", default=None, metavar="FILE")
    pp.add_argument("--json", action="store_true")
    pp.set_defaults(func=cmd_ppa)

    ds = sub.add_parser("dse", help="sweep split depth × area budget")
    ds.add_argument("frozen")
    ds.add_argument("--budgets", default=None,
                    help="comma list or start:stop:step, in mm²")
    ds.add_argument("--splits", default=None, help="comma list of N values")
    ds.add_argument("--preset", choices=["table2"], default=None)
    ds.add_argument("--cost", default=None, metavar="FILE")
    ds.add_argument("--csv", default=None, metavar="FILE")
    ds.add_argument("--svg", default=None, metavar="DIR")
    ds.add_argument("--json", action="store_true")
    ds.set_defaults(func=cmd_dse)

    return p


# ----------------------------------------------------------- subcommands

def cmd_model_info(args) -> int:
    graph, _, quant = formats.read_manifest(args.manifest)
    macs = count_macs(graph)
    params = count_params(graph)
    units = graph.prefix_units()
    if args.json:
        doc = {
            "input_shape": list(graph.input_shape),
            "layers": [
                {"kind": l.kind.value, "in_channels": l.in_channels,
                 "out_channels": l.out_channels, "kernel": l.kernel,
                 "stride": l.stride, "macs": macs.per_layer[i],
                 "params": params.per_layer[i], "bn_params": params.bn_per_layer[i]}
                for i, l in enumerate(graph.layers)
            ],
            "total_macs": macs.total,
            "total_params": params.total,
            "total_bn_params": params.bn_total,
            "fixable_units": len(units),
            "fixed_ops_fraction": [fixed_ops_fraction(graph, n)
                                   for n in range(len(units) + 1)],
            "quantized": quant is not None,
        }
        print(json.dumps(doc, indent=2))
        return 0
    shapes = graph.layer_shapes()
    print(f"input {graph.input_shape[0]}x{graph.input_shape[1]}"
          f"x{graph.input_shape[2]}" + ("  [frozen]" if quant else ""))
    print(f"{'idx':>3} {'kind':<16} {'output':<13} {'k':>2} {'s':>2} "
          f"{'MACs':>12} {'params':>9}")
    for i, layer in enumerate(graph.layers):
        h, w, c = shapes[i + 1]
        print(f"{i:>3} {layer.kind.value:<16} {f'{h}x{w}x{c}':<13} "
              f"{layer.kernel:>2} {layer.stride:>2} "
              f"{macs.per_layer[i]:>12,} {params.per_layer[i]:>9,}")
    print(f"total: {macs.total:,} MACs; {params.total:,} weight params "
          f"(+{params.bn_total:,} BN); {len(units)} fixable prefix units")
    return 0


def cmd_model_build(args) -> int:
    graph = build_mobilenet(args.width, args.resolution, args.classes)
    bundle = random_bundle(graph, args.seed)
    path = formats.save_bundle(args.output, bundle)
    print(f"wrote {path} (+ weight blob), seed {args.seed}")
    return 0


def cmd_compress(args) -> int:
    bundle = formats.load_bundle(args.model)
    calib = formats.read_tensor(args.calib)
    frozen = compress(bundle, args.sparsity, args.bits, calib,
                      args.input_exponent)
    out = args.output or str(Path(args.model).with_suffix("")) + ".frozen.json"
    save_frozen(out, frozen)
    worst = max(frozen.achieved_sparsity.values()) if frozen.achieved_sparsity else 0.0
    if args.json:
        print(json.dumps({
            "output": str(out),
            "target_sparsity": frozen.target_sparsity,
            "achieved_sparsity": {str(k): v for k, v in
                                  sorted(frozen.achieved_sparsity.items())},
            "input_exponent": frozen.input_exponent,
            "activation_exponents": list(frozen.act_exponents),
        }, indent=2))
    else:
        print(f"wrote {out}: sparsity target {frozen.target_sparsity:.2f}, "
              f"achieved up to {worst:.4f}; input exponent {frozen.input_exponent}")
    return 0


def cmd_run(args) -> int:
    frozen = load_frozen(args.frozen)
    image = formats.read_tensor(args.input)
    result = infer(frozen, image)
    dumped = []
    if args.dump_taps:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for k in range(1, len(frozen.graph.prefix_units()) + 1):
            t = tap(frozen, image, k)
            path = out_dir / f"tap_{k}.bin"
            formats.write_tensor(path, t.values)
            dumped.append(str(path))
    logits = [int(v) for v in result.logits]
    if args.json:
        print(json.dumps({"logits": logits,
                          "argmax": int(np.argmax(result.logits)),
                          "taps": dumped}, indent=2))
    else:
        print(f"logits[{len(logits)}]: argmax {int(np.argmax(result.logits))}, "
              f"max {max(logits)}")
        for path in dumped:
            print(f"wrote {path}")
    return 0


def cmd_freeze(args) -> int:
    frozen = load_frozen(args.frozen)
    spec = netlist_mod.FreezeSpec(args.n_fixed, frozenset(args.tap),
                                  args.adaptive_bn)
    nl = netlist_mod.freeze(frozen, spec)
    netlist_mod.save_netlist(args.output, nl)
    stats = netlist_mod.pipeline_stats(nl)
    if args.json:
        print(json.dumps({"output": args.output, "stages": len(nl.stages),
                          "multipliers": stats.multipliers,
                          "adders": stats.adders,
                          "register_bits": stats.register_bits,
                          "line_buffer_bits": stats.line_buffer_bits,
                          "pipeline_depth": stats.pipeline_depth,
                          "max_stage_pixels": stats.max_stage_pixels}, indent=2))
    else:
        print(f"wrote {args.output}: {len(nl.stages)} stages, "
              f"{stats.multipliers} multipliers, {stats.adders} adders, "
              f"{stats.line_buffer_bits} line-buffer bits, "
              f"depth {stats.pipeline_depth}")
    return 0


def cmd_sim(args) -> int:
    nl = netlist_mod.load_netlist(args.netlist)
    out = {}
    code = 0
    if args.input:
        image = formats.read_tensor(args.input)
        frame = sim_mod.simulate(nl, image)[0]
        out["cycles"] = frame.cycles
        out["output_shape"] = list(frame.output.shape)
        if args.output:
            formats.write_tensor(args.output, frame.output)
            out["output"] = args.output
    if args.check_against:
        frozen = load_frozen(args.check_against)
        report = sim_mod.check_equivalence(nl, frozen, args.trials, args.seed)
        out["equivalence"] = {
            "passed": report.passed, "trials": report.trials,
            "mismatch": report.mismatch, "warning": report.warning,
        }
        if not report.passed:
            code = USER_ERROR
    if not args.input and not args.check_against:
        raise ConfigurationError("nothing to do: give --input and/or --check-against")
    if args.json:
        print(json.dumps(out, indent=2))
    else:
        if "cycles" in out:
            print(f"simulated 1 frame in {out['cycles']} cycles -> "
                  f"{'x'.join(str(d) for d in out['output_shape'])}"
                  + (f", wrote {out['output']}" if "output" in out else ""))
        if "equivalence" in out:
            print(str(sim_mod.EquivalenceReport(**out["equivalence"])))
    return code


def cmd_emit_rtl(args) -> int:
    nl = netlist_mod.load_netlist(args.netlist)
    files = rtl.emit_verilog(nl)
    files.update(rtl.emit_testbench(nl, args.tb_vectors, args.seed))
    rtl.write_files(args.output, files)
    for rel in sorted(files):
        print(f"wrote {Path(args.output) / rel}")
    return 0


def _cost_from(args) -> ppa_mod.CostConfig:
    path = args.cost or os.environ.get("FIXYNN_COST_CONFIG")
    return ppa_mod.load_cost_config(path) if path else ppa_mod.CostConfig()


def cmd_ppa(args) -> int:
    nl = netlist_mod.load_netlist(args.netlist)
    stats = netlist_mod.pipeline_stats(nl)
    report = ppa_mod.ffe_ppa(nl, stats, _cost_from(args))
    if args.json:
        print(json.dumps({
            "area_mm2": report.area_mm2, "power_w": report.power_w,
            "tops": report.tops, "tops_per_w": report.tops_per_w,
            "frame_rate": report.frame_rate,
            "latency_cycles": report.latency_cycles,
            "multipliers": stats.multipliers, "adders": stats.adders,
            "register_bits": stats.register_bits,
            "line_buffer_bits": stats.line_buffer_bits,
        }, indent=2))
    else:
        print(f"area {report.area_mm2:.4f} mm2; power {report.power_w * 1e3:.2f} mW; "
              f"{report.tops:.3f} TOPS; {report.tops_per_w:.1f} TOPS/W; "
              f"{report.frame_rate:.0f} fps; latency {report.latency_cycles} cycles")
    return 0


def _parse_budgets(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"bad budget range {text!r}, want start:stop:step")
        start, stop, step = (float(x) for x in parts)
        if step <= 0 or stop < start:
            raise ConfigurationError(f"bad budget range {text!r}")
        vals = []
        i = 0
        while start + i * step <= stop + 1e-9:
            vals.append(round(start + i * step, 9))
            i += 1
        return vals
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_dse(args) -> int:
    frozen = load_frozen(args.frozen)
    if args.preset == "table2":
        budgets, splits = list(dse_mod.TABLE2_BUDGETS), list(dse_mod.TABLE2_SPLITS)
    else:
        if not args.budgets or not args.splits:
            raise ConfigurationError("give --budgets and --splits, or --preset table2")
        budgets = _parse_budgets(args.budgets)
        splits = [int(x) for x in args.splits.split(",") if x.strip()]
    points = dse_mod.sweep(frozen, budgets, splits, _cost_from(args))
    written = dse_mod.report(points, args.csv, args.svg)
    if args.json:
        doc = [{
            "n_fixed": p.n_fixed, "budget_mm2": p.budget_mm2,
            "fixed_ops": p.fixed_ops, "ffe_area_mm2": p.ffe_area_mm2,
            "backend_area_mm2": p.backend_area_mm2,
            "backend_tops": p.backend_tops,
            "system_tops": p.system.tops,
            "system_tops_per_w": p.system.tops_per_w,
            "feasible": p.feasible,
        } for p in sorted(points, key=lambda p: (p.n_fixed, p.budget_mm2))]
        print(json.dumps(doc, indent=2))
    else:
        base = {p.budget_mm2: p.system for p in points
                if p.n_fixed == 0 and p.feasible}
        print(f"{'N':>3} {'budget':>7} {'ffe mm2':>8} {'be mm2':>7} "
              f"{'sys TOPS':>9} {'rel':>6} {'TOPS/W':>7} {'rel':>6} {'ok':>3}")
        for p in sorted(points, key=lambda p: (p.n_fixed, p.budget_mm2)):
            b = base.get(p.budget_mm2)
            rel_t = f"{p.system.tops / b.tops:.2f}" if b and p.feasible else "-"
            rel_e = f"{p.system.tops_per_w / b.tops_per_w:.2f}" if b and p.feasible else "-"
            print(f"{p.n_fixed:>3} {p.budget_mm2:>7.2f} {p.ffe_area_mm2:>8.3f} "
                  f"{p.backend_area_mm2:>7.3f} {p.system.tops:>9.3f} {rel_t:>6} "
                  f"{p.system.tops_per_w:>7.2f} {rel_e:>6} "
                  f"{'yes' if p.feasible else 'NO':>3}")
        for path in written:
            print(f"wrote {path}")
    return 0


# ------------------------------------------------------------------ main

_USER_ERRORS = (ConfigurationError, formats.FormatError,
                EncodingError, ppa_mod.InfeasibleAreaError,
                AccumulatorOverflow, FileNotFoundError, IsADirectoryError,
                PermissionError, ValueError)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return USER_ERROR
    try:
        return args.func(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USER_ERROR
    except Exception as exc:                      # noqa: BLE001 — CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
