#!/usr/bin/env python3
"""Fit the default CostConfig constants.

Anchors: published backend scaling table inverted at a 3.0 mm² total
budget. For each split depth N in {4, 7, 11} the published relative
system throughput (1.21/1.37/1.66 vs the all-programmable baseline)
plus the published fixed-ops fractions give a backend TOPS requirement;
inverse interpolation of the table turns that into a backend area, and
the remainder of the 3.0 mm² budget is the front-end area anchor
(~0.35 / 0.73 / 1.60 mm²).

The relative-throughput acceptance band is evaluated with *our* ops
fractions, which differ slightly from the published ones (ours count
every MAC incl. FC; see notes). So each anchor is narrowed to the
intersection of anchor±10% with the band implied by the ±5% throughput
tolerance, and the constants are chosen by a max-margin feasibility LP:
a_mult, a_reg, a_sram free (a_add tied to a_mult/4 — roughly the adder
tree share of a booth multiplier), maximizing the relative distance of
all three fitted areas from their window edges. A plain least-squares
fit with physically tied ratios is infeasible here: the anchors grow
only ~5x from N=4 to N=11 while every register-like count grows 8-12x,
so the slow-growing line-buffer term has to carry most of the N=4 area;
the fitted constants are effective calibration values, not process
numbers.

Energy constants are then scaled so the front-end's duty-cycled power
lands near `--ffe-mw` at N=11, keeping the front-end well under 10% of
system power while leaving the efficiency column inside its ±15% band.

Run:  python3 scripts/calibrate_cost_model.py
Paste the printed block into ppa._DEFAULTS when it changes.
"""

import argparse

import numpy as np

from fixynn.compress import compress
from fixynn.model import build_mobilenet, fixed_ops_fraction, random_bundle
from fixynn.netlist import FreezeSpec, freeze, pipeline_stats
from fixynn.ppa import (CostConfig, backend_area_for_tops,
                        ffe_ppa, nvdla_point, system_ppa)

BUDGET = 3.0
SPLITS = (4, 7, 11)
REL_TOPS = {4: 1.21, 7: 1.37, 11: 1.66}          # published, vs N=0
REL_TOPS_PER_W = {4: 1.43, 7: 1.93, 11: 4.63}
F_PUBLISHED = {4: 0.271, 7: 0.443, 11: 0.770}


def area_window(n, f_ours, base_tops, anchor):
    """Feasible FFE-area interval for split n.

    Intersection of anchor±10% (config invariant) with the interval
    that keeps backend_tops(3-A)/((1-f_ours)*base) inside ±5% of the
    published relative throughput.
    """
    lo_rel, hi_rel = 0.95 * REL_TOPS[n], 1.05 * REL_TOPS[n]
    # backend TOPS needed at the band edges, with our ops fraction
    be_lo = lo_rel * base_tops * (1.0 - f_ours)
    be_hi = hi_rel * base_tops * (1.0 - f_ours)
    # more backend TOPS -> more backend area -> less FFE area
    a_hi = BUDGET - backend_area_for_tops(be_lo)
    a_lo = BUDGET - backend_area_for_tops(be_hi)
    lo = max(a_lo, 0.9 * anchor)
    hi = min(a_hi, 1.1 * anchor)
    if lo > hi:
        raise SystemExit(f"N={n}: empty area window [{a_lo:.4f},{a_hi:.4f}] "
                         f"vs anchor {anchor:.4f}+-10%")
    return lo, hi


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7, help="weight seed")
    ap.add_argument("--sparsity", type=float, default=0.5)
    ap.add_argument("--ffe-mw", type=float, default=8.5,
                    help="target duty-cycled FFE power at N=11, milliwatts")
    args = ap.parse_args()

    graph = build_mobilenet(0.25, 224)
    bundle = random_bundle(graph, args.seed)
    rng = np.random.default_rng(99)
    calib = rng.integers(-128, 128, size=(2, 224, 224, 3), dtype=np.int8)
    frozen = compress(bundle, args.sparsity, 8, calib)

    base_tops = nvdla_point(BUDGET).tops

    stats, counts, windows, targets = {}, {}, {}, {}
    for n in SPLITS:
        nl = freeze(frozen, FreezeSpec(n))
        st = pipeline_stats(nl)
        stats[n] = (nl, st)
        counts[n] = (st.multipliers, st.adders, st.register_bits,
                     st.line_buffer_bits)
        f_ours = fixed_ops_fraction(graph, n)
        be = REL_TOPS[n] * base_tops * (1.0 - F_PUBLISHED[n])
        anchor = BUDGET - backend_area_for_tops(be)
        lo, hi = area_window(n, f_ours, base_tops, anchor)
        windows[n] = (lo, hi, anchor)
        targets[n] = 0.5 * (lo + hi)
        print(f"N={n:2d}: mult={st.multipliers:6d} add={st.adders:6d} "
              f"reg={st.register_bits:7d} lb={st.line_buffer_bits:7d} "
              f"anchor={anchor:.5f} window=[{lo:.5f},{hi:.5f}] "
              f"target={targets[n]:.5f}")

    # --- fit area constants: area = a_mult*(M + A/4) + a_reg*R + a_sram*S
    # Chebyshev-style LP: maximize the margin delta such that every
    # fitted area sits at least delta*(window width) inside its window.
    from scipy.optimize import linprog

    u = np.array([counts[n][0] + counts[n][1] / 4.0 for n in SPLITS])
    r = np.array([float(counts[n][2]) for n in SPLITS])
    s = np.array([float(counts[n][3]) for n in SPLITS])
    lo = np.array([windows[n][0] for n in SPLITS])
    hi = np.array([windows[n][1] for n in SPLITS])
    w = hi - lo
    # variables: (a_mult, a_reg, a_sram, delta); maximize delta
    A_ub = np.vstack([
        np.column_stack([-u, -r, -s, w]),    # lo + delta*w <= area
        np.column_stack([u, r, s, w]),       # area <= hi - delta*w
    ])
    b_ub = np.concatenate([-lo, hi])
    res = linprog(c=[0.0, 0.0, 0.0, -1.0], A_ub=A_ub, b_ub=b_ub,
                  bounds=[(1e-6, None), (1e-8, None), (1e-8, None), (0, 0.5)],
                  method="highs")
    if not res.success:
        raise SystemExit(f"area fit infeasible: {res.message}")
    a_mult, a_reg, a_sram, margin = res.x
    a_add = a_mult / 4.0
    print(f"\nfit (margin {margin:.3f}): a_mult={a_mult:.6e} "
          f"a_add={a_add:.6e} a_reg={a_reg:.6e} a_sram={a_sram:.6e}")

    for n in SPLITS:
        m, a, r, s = counts[n]
        area = a_mult * m + a_add * a + a_reg * r + a_sram * s
        lo, hi, anchor = windows[n]
        ok = "ok" if lo <= area <= hi else "OUT OF WINDOW"
        print(f"  N={n:2d}: fitted area {area:.5f} vs anchor {anchor:.5f} "
              f"({area / anchor - 1:+.1%})  {ok}")

    # --- energy: shape fixed (mult:add:reg = 60:15:1 pJ-ish), scale to
    # hit the duty-cycled FFE power target at N=11.
    cost0 = CostConfig(a_mult=a_mult, a_add=a_add, a_reg=a_reg,
                       a_sram=a_sram, e_mult=60e-15, e_add=15e-15,
                       e_reg=1e-15, p_leak=2e-3)
    nl11, _ = stats[11]
    f11 = fixed_ops_fraction(graph, 11)
    ffe11 = ffe_ppa(nl11, cost=cost0)
    be_tops11 = nvdla_point(BUDGET - ffe11.area_mm2).tops
    sys_tops11 = be_tops11 / (1.0 - f11)
    duty11 = f11 * sys_tops11 / ffe11.tops
    leak = cost0.p_leak * ffe11.area_mm2
    dyn = ffe11.power_w - leak
    # duty * (k*dyn + leak) = target  (leakage is also gated off)
    k = (args.ffe_mw * 1e-3 / duty11 - leak) / dyn
    if k <= 0:
        raise SystemExit(f"energy scale came out non-positive: k={k:.3e}")
    cost = CostConfig(a_mult=a_mult, a_add=a_add, a_reg=a_reg, a_sram=a_sram,
                      e_mult=60e-15 * k, e_add=15e-15 * k, e_reg=1e-15 * k,
                      p_leak=2e-3)
    print(f"\nenergy scale k={k:.4f} (duty@11={duty11:.4f})")

    # --- verify both published columns at the 3.0 mm² budget
    base = nvdla_point(BUDGET)
    base_p = base.tops / base.tops_per_w
    print(f"\n{'N':>3} {'ffe mm2':>9} {'rel tops':>9} {'band':>13} "
          f"{'rel t/w':>8} {'band':>13} {'ffe mW':>7} {'ffe %P':>6}")
    all_ok = True
    for n in SPLITS:
        nl, _ = stats[n]
        f_ours = fixed_ops_fraction(graph, n)
        ffe = ffe_ppa(nl, cost=cost)
        be = nvdla_point(BUDGET - ffe.area_mm2)
        sysr = system_ppa(ffe, f_ours, be)
        rel_t = sysr.tops / base.tops
        rel_e = sysr.tops_per_w / base.tops_per_w
        sys_p = sysr.tops / sysr.tops_per_w
        duty = f_ours * sysr.tops / ffe.tops
        lo_t, hi_t = 0.95 * REL_TOPS[n], 1.05 * REL_TOPS[n]
        lo_e, hi_e = 0.85 * REL_TOPS_PER_W[n], 1.15 * REL_TOPS_PER_W[n]
        ok_t = lo_t <= rel_t <= hi_t
        ok_e = lo_e <= rel_e <= hi_e
        ok_p = duty * ffe.power_w < 0.10 * sys_p
        all_ok &= ok_t and ok_e and ok_p
        print(f"{n:>3} {ffe.area_mm2:>9.5f} {rel_t:>9.4f} "
              f"[{lo_t:.3f},{hi_t:.3f}] {rel_e:>8.4f} "
              f"[{lo_e:.3f},{hi_e:.3f}] {duty * ffe.power_w * 1e3:>7.3f} "
              f"{duty * ffe.power_w / sys_p:>6.1%}"
              + ("" if ok_t and ok_e and ok_p else "  <-- VIOLATION"))

    print("\npaste into ppa._DEFAULTS:")
    print(f'    "f_clk": {cost.f_clk:.6g},')
    for name in ("a_mult", "a_add", "a_reg", "a_sram",
                 "e_mult", "e_add", "e_reg", "p_leak"):
        print(f'    "{name}": {getattr(cost, name):.6e},')
    if not all_ok:
        raise SystemExit("calibration violates an acceptance band")
    print("all bands satisfied")


if __name__ == "__main__":
    main()
