"""Design-space exploration over (split depth, silicon budget).

Each point freezes the first N prefix units, gives the back-end whatever
area remains inside the budget via table interpolation, and composes the
two. Points whose leftover area falls below the smallest published
back-end config are kept and flagged infeasible rather than dropped, so
the low-budget regime stays visible in reports.

Report files are deterministic: CSV rows are sorted by (N, budget), and
the SVG scatter plots are synthesized directly (fixed palette, fixed tick
format) so identical sweeps produce identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .compress import FrozenModel
from .model import fixed_ops_fraction
from .netlist import FreezeSpec, freeze, pipeline_stats
from .ppa import (PUBLISHED_NVDLA, CostConfig, InfeasibleAreaError,
                  NvdlaTable, PpaReport, ZERO_REPORT, ffe_ppa, nvdla_point,
                  system_ppa)

TABLE2_BUDGETS = (3.0,)
TABLE2_SPLITS = (0, 4, 7, 11)


@dataclass(frozen=True)
class DsePoint:
    n_fixed: int
    budget_mm2: float
    fixed_ops: float
    ffe_area_mm2: float
    backend_area_mm2: float
    backend_tops: float
    backend_tops_per_w: float
    system: PpaReport
    feasible: bool


def sweep(frozen: FrozenModel, budgets, splits, cost: CostConfig | None = None,
          table: NvdlaTable = PUBLISHED_NVDLA) -> list[DsePoint]:
    budgets = list(budgets)
    splits = list(splits)
    if not budgets or not splits:
        raise ValueError("sweep needs at least one budget and one split")
    cost = cost if cost is not None else CostConfig()
    points = []
    for n in sorted(set(splits)):
        netlist = freeze(frozen, FreezeSpec(n))
        ffe = ffe_ppa(netlist, pipeline_stats(netlist), cost)
        f = fixed_ops_fraction(frozen.graph, n)
        for budget in sorted(set(budgets)):
            remaining = budget - ffe.area_mm2
            try:
                backend = nvdla_point(remaining, table)
            except InfeasibleAreaError:
                points.append(DsePoint(n, budget, f, ffe.area_mm2, remaining,
                                       0.0, 0.0, ZERO_REPORT, False))
                continue
            points.append(DsePoint(n, budget, f, ffe.area_mm2,
                                   backend.area_mm2, backend.tops,
                                   backend.tops_per_w,
                                   system_ppa(ffe, f, backend), True))
    return points


def pareto(points: list[DsePoint]) -> list[DsePoint]:
    """Feasible points not dominated in (TOPS, TOPS/W) by any point at
    equal or smaller area; stable order by area."""
    if not points:
        raise ValueError("no points to filter")

    def dominates(q: DsePoint, p: DsePoint) -> bool:
        qs, ps = q.system, p.system
        return (qs.tops >= ps.tops and qs.tops_per_w >= ps.tops_per_w
                and qs.area_mm2 <= ps.area_mm2
                and (qs.tops > ps.tops or qs.tops_per_w > ps.tops_per_w
                     or qs.area_mm2 < ps.area_mm2))

    feasible = [p for p in points if p.feasible]
    front = [p for p in feasible
             if not any(dominates(q, p) for q in feasible if q is not p)]
    return sorted(front, key=lambda p: (p.system.area_mm2, p.n_fixed))


CSV_HEADER = ("n_fixed,budget_mm2,ffe_area_mm2,backend_area_mm2,"
              "backend_tops,system_tops,system_tops_per_w,feasible")


def _num(x: float) -> str:
    return format(x, ".6g")


def csv_text(points: list[DsePoint]) -> str:
    lines = [CSV_HEADER]
    for p in sorted(points, key=lambda p: (p.n_fixed, p.budget_mm2)):
        lines.append(",".join([
            str(p.n_fixed), _num(p.budget_mm2), _num(p.ffe_area_mm2),
            _num(p.backend_area_mm2), _num(p.backend_tops),
            _num(p.system.tops), _num(p.system.tops_per_w),
            "true" if p.feasible else "false",
        ]))
    return "\n".join(lines) + "\n"


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"]


def _svg_scatter(points: list[DsePoint], metric, title: str, ylabel: str) -> str:
    feasible = sorted((p for p in points if p.feasible),
                      key=lambda p: (p.n_fixed, p.budget_mm2))
    skipped = sum(1 for p in points if not p.feasible)
    w, h = 640, 480
    x0, y0, x1, y1 = 64, 40, 600, 430
    xs = [p.budget_mm2 for p in feasible]
    ys = [metric(p) for p in feasible]
    xlo, xhi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    ylo, yhi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5

    def px(x):
        return x0 + (x - xlo) / (xhi - xlo) * (x1 - x0)

    def py(y):
        return y1 - (y - ylo) / (yhi - ylo) * (y1 - y0)

    ns = sorted({p.n_fixed for p in feasible})
    color = {n: _PALETTE[i % len(_PALETTE)] for i, n in enumerate(ns)}
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
           f'<text x="{(x0 + x1) / 2:.1f}" y="20" text-anchor="middle" '
           f'font-size="14">{title}</text>',
           f'<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>',
           f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>']
    for i in range(5):
        xv = xlo + i * (xhi - xlo) / 4
        yv = ylo + i * (yhi - ylo) / 4
        out.append(f'<line x1="{px(xv):.1f}" y1="{y1}" x2="{px(xv):.1f}" '
                   f'y2="{y1 + 4}" stroke="black"/>')
        out.append(f'<text x="{px(xv):.1f}" y="{y1 + 18}" '
                   f'text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<line x1="{x0 - 4}" y1="{py(yv):.1f}" x2="{x0}" '
                   f'y2="{py(yv):.1f}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{py(yv) + 4:.1f}" '
                   f'text-anchor="end">{yv:.3g}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{h - 8}" '
               f'text-anchor="middle">total area budget (mm2)</text>')
    out.append(f'<text x="16" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">{ylabel}</text>')
    for p in feasible:
        out.append(f'<circle cx="{px(p.budget_mm2):.1f}" '
                   f'cy="{py(metric(p)):.1f}" r="4" fill="{color[p.n_fixed]}" '
                   f'fill-opacity="0.85"/>')
    for i, n in enumerate(ns):
        lx, ly = x1 - 90, y0 + 8 + 16 * i
        out.append(f'<rect x="{lx}" y="{ly}" width="10" height="10" '
                   f'fill="{color[n]}"/>')
        out.append(f'<text x="{lx + 14}" y="{ly + 9}">N = {n}</text>')
    if skipped:
        out.append(f'<text x="{x0}" y="{y0 - 6}" fill="#888">'
                   f'{skipped} infeasible point(s) omitted</text>')
    out.append('</svg>')
    return "\n".join(out) + "\n"


def report(points: list[DsePoint], csv_path: str | Path | None = None,
           svg_dir: str | Path | None = None) -> list[Path]:
    """Write CSV and/or SVG scatter plots; returns the paths written."""
    written = []
    if csv_path is not None:
        csv_path = Path(csv_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(csv_text(points))
        written.append(csv_path)
    if svg_dir is not None:
        svg_dir = Path(svg_dir)
        svg_dir.mkdir(parents=True, exist_ok=True)
        plots = [
            ("tops_vs_area.svg", lambda p: p.system.tops,
             "System throughput vs silicon budget", "system TOPS"),
            ("tops_per_w_vs_area.svg", lambda p: p.system.tops_per_w,
             "System efficiency vs silicon budget", "system TOPS/W"),
        ]
        for fname, metric, title, ylabel in plots:
            path = svg_dir / fname
            path.write_text(_svg_scatter(points, metric, title, ylabel))
            written.append(path)
    return written
