#!/usr/bin/env python3
"""Where should the fixed front end stop? A depth sweep on MobileNet-0.25.

Builds a seeded random-weight MobileNet-0.25 @224, compresses it (50%
magnitude pruning, int8 power-of-two quantization), then freezes every
possible prefix depth and reports, per depth: the cumulative share of
operations absorbed by the fixed pipeline, the structural cost of the
datapath, its standalone PPA, and the composed system point when the
remaining silicon inside a fixed budget buys a programmable back end.

The interesting regime is the knee where line buffers stop growing
(spatial resolution has collapsed) but multiplier count explodes —
past it, fixing more layers buys efficiency much faster than area.

Usage:
    python3 scripts/mobilenet_split_report.py [--budget 3.0] [--csv out.csv]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fixynn.compress import compress
from fixynn.dse import report as dse_report, sweep
from fixynn.model import build_mobilenet, count_macs, fixed_ops_fraction, random_bundle
from fixynn.netlist import FreezeSpec, freeze, pipeline_stats
from fixynn.ppa import CostConfig, ffe_ppa


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--width", type=float, default=0.25)
    ap.add_argument("--resolution", type=int, default=224)
    ap.add_argument("--sparsity", type=float, default=0.5)
    ap.add_argument("--budget", type=float, default=3.0,
                    help="total silicon budget for the composed system, mm²")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--csv", default=None, help="also write the sweep as CSV")
    ap.add_argument("--svg", default=None, help="directory for scatter plots")
    args = ap.parse_args(argv)

    graph = build_mobilenet(args.width, args.resolution)
    bundle = random_bundle(graph, args.seed)
    rng = np.random.default_rng(99)
    calib = rng.integers(-128, 128, size=(2,) + graph.input_shape, dtype=np.int8)
    frozen = compress(bundle, args.sparsity, 8, calib)

    n_units = len(graph.prefix_units())
    macs = count_macs(graph)
    print(f"MobileNet-{args.width} @{args.resolution}: {macs.total:,} MACs, "
          f"{n_units} fixable prefix units, {args.sparsity:.0%} pruned\n")

    cost = CostConfig()
    print(f"{'N':>2} {'f':>7} {'mults':>7} {'adders':>7} {'reg kb':>7} "
          f"{'lb kb':>6} {'mm2':>7} {'mW':>7} {'fps':>9} {'TOPS/W':>8}")
    for n in range(n_units + 1):
        nl = freeze(frozen, FreezeSpec(n))
        st = pipeline_stats(nl)
        rep = ffe_ppa(nl, st, cost)
        f = fixed_ops_fraction(graph, n)
        print(f"{n:>2} {f:>7.4f} {st.multipliers:>7} {st.adders:>7} "
              f"{st.register_bits / 8192:>7.1f} {st.line_buffer_bits / 8192:>6.1f} "
              f"{rep.area_mm2:>7.4f} {rep.power_w * 1e3:>7.2f} "
              f"{rep.frame_rate:>9.0f} "
              f"{rep.tops_per_w:>8.1f}" if n else
              f"{n:>2} {f:>7.4f} {'-':>7} {'-':>7} {'-':>7} {'-':>6} "
              f"{'-':>7} {'-':>7} {'-':>9} {'-':>8}")

    # composed system at the fixed budget, all depths that leave room
    # for at least the smallest back-end config
    points = sweep(frozen, [args.budget], list(range(n_units + 1)), cost)
    feasible = [p for p in points if p.feasible]
    base = next(p for p in feasible if p.n_fixed == 0).system
    print(f"\nsystem at {args.budget} mm² (relative to all-programmable):")
    print(f"{'N':>2} {'ffe mm2':>8} {'be mm2':>8} {'TOPS':>7} {'rel':>6} "
          f"{'TOPS/W':>7} {'rel':>6}")
    for p in feasible:
        s = p.system
        print(f"{p.n_fixed:>2} {p.ffe_area_mm2:>8.4f} {p.backend_area_mm2:>8.4f} "
              f"{s.tops:>7.3f} {s.tops / base.tops:>6.2f} "
              f"{s.tops_per_w:>7.2f} {s.tops_per_w / base.tops_per_w:>6.2f}")
    skipped = [p.n_fixed for p in points if not p.feasible]
    if skipped:
        print(f"depths {skipped} leave less area than the smallest back-end "
              f"config and are infeasible at this budget")

    best = max(feasible, key=lambda p: p.system.tops_per_w)
    print(f"\nbest efficiency: N={best.n_fixed} "
          f"({best.fixed_ops:.1%} of ops fixed) -> "
          f"{best.system.tops_per_w:.2f} TOPS/W, "
          f"{best.system.tops / base.tops:.2f}x throughput")

    written = dse_report(points, args.csv, args.svg)
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
