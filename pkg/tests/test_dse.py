"""Sweep mechanics: point grid, feasibility, CSV/SVG reports, pareto."""

import math

import pytest

from fixynn.dse import (CSV_HEADER, TABLE2_BUDGETS, TABLE2_SPLITS, csv_text,
                        pareto, report, sweep)
from fixynn.model import fixed_ops_fraction
from fixynn.ppa import PUBLISHED_NVDLA, ZERO_REPORT, nvdla_point


def test_split_zero_at_published_area_matches_backend_row(tiny_frozen):
    # no fixed prefix, budget exactly at config D: pure back-end system
    [pt] = sweep(tiny_frozen, [1.40], [0])
    row = PUBLISHED_NVDLA.rows[3]
    assert pt.feasible
    assert pt.ffe_area_mm2 == 0.0
    assert pt.backend_area_mm2 == row.area_mm2
    assert pt.system.tops == row.tops
    assert pt.system.tops_per_w == row.tops_per_w


def test_budget_below_min_backend_is_flagged_infeasible(tiny_frozen):
    [pt] = sweep(tiny_frozen, [0.50], [0])
    assert not pt.feasible
    assert pt.system == ZERO_REPORT
    assert pt.backend_tops == 0.0


def test_sweep_grid_covers_all_pairs(tiny_frozen):
    points = sweep(tiny_frozen, [1.0, 2.0], [0, 1, 2])
    assert {(p.n_fixed, p.budget_mm2) for p in points} == {
        (n, b) for n in (0, 1, 2) for b in (1.0, 2.0)}
    for p in points:
        assert p.fixed_ops == fixed_ops_fraction(tiny_frozen.graph, p.n_fixed)


def test_deeper_prefix_leaves_less_backend_area(tiny_frozen):
    points = sweep(tiny_frozen, [2.0], [0, 1, 2])
    areas = [p.ffe_area_mm2 for p in sorted(points, key=lambda p: p.n_fixed)]
    assert areas[0] == 0.0 and areas[0] < areas[1] < areas[2]
    backend = [p.backend_area_mm2 for p in sorted(points, key=lambda p: p.n_fixed)]
    assert backend[0] > backend[1] > backend[2]


def test_sweep_rejects_empty_axes(tiny_frozen):
    with pytest.raises(ValueError):
        sweep(tiny_frozen, [], [0])
    with pytest.raises(ValueError):
        sweep(tiny_frozen, [1.0], [])


def test_table2_preset_speedups_increase_with_depth(mobilenet_frozen):
    points = sweep(mobilenet_frozen, TABLE2_BUDGETS, TABLE2_SPLITS)
    points.sort(key=lambda p: p.n_fixed)
    assert [p.n_fixed for p in points] == [0, 4, 7, 11]
    assert all(p.feasible for p in points)
    base = points[0].system
    assert base.tops == nvdla_point(3.0).tops
    rel = [p.system.tops / base.tops for p in points]
    assert rel[0] == 1.0 and rel[0] < rel[1] < rel[2] < rel[3]
    eff = [p.system.tops_per_w / base.tops_per_w for p in points]
    assert eff[0] == 1.0 and eff[0] < eff[1] < eff[2] < eff[3]


# ------------------------------------------------------------------ reports

def test_csv_header_and_rows(tiny_frozen):
    points = sweep(tiny_frozen, [0.50, 1.40], [0, 1])
    text = csv_text(points)
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    assert CSV_HEADER == ("n_fixed,budget_mm2,ffe_area_mm2,backend_area_mm2,"
                          "backend_tops,system_tops,system_tops_per_w,feasible")
    assert len(lines) == 1 + len(points)
    assert text.endswith("\n")
    # sorted by (n_fixed, budget); feasibility is a lowercase literal
    keys = [(int(r.split(",")[0]), float(r.split(",")[1])) for r in lines[1:]]
    assert keys == sorted(keys)
    assert {r.split(",")[-1] for r in lines[1:]} == {"true", "false"}


def test_reports_are_deterministic(tiny_frozen, tmp_path):
    points = sweep(tiny_frozen, [1.0, 1.5, 2.0], [0, 1, 2])
    first = report(points, csv_path=tmp_path / "a.csv", svg_dir=tmp_path / "a")
    second = report(points, csv_path=tmp_path / "b.csv", svg_dir=tmp_path / "b")
    assert [p.name for p in first[1:]] == [p.name for p in second[1:]] == [
        "tops_vs_area.svg", "tops_per_w_vs_area.svg"]
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_svg_plots_points_and_legend(tiny_frozen, tmp_path):
    points = sweep(tiny_frozen, [0.50, 1.0, 2.0], [0, 2])
    paths = report(points, svg_dir=tmp_path)
    n_feasible = sum(p.feasible for p in points)
    n_infeasible = len(points) - n_feasible
    for path in paths:
        svg = path.read_text()
        assert svg.count("<circle") == n_feasible
        assert "N = 0" in svg and "N = 2" in svg
        assert f"{n_infeasible} infeasible point(s) omitted" in svg


def test_csv_only_report(tiny_frozen, tmp_path):
    points = sweep(tiny_frozen, [1.0], [0])
    paths = report(points, csv_path=tmp_path / "out.csv")
    assert [p.name for p in paths] == ["out.csv"]
    assert (tmp_path / "out.csv").read_text() == csv_text(points)


# ------------------------------------------------------------------- pareto

def test_pareto_front_is_dominance_free(tiny_frozen):
    points = sweep(tiny_frozen, [0.6, 1.0, 1.8, 2.5, 3.3], [0, 1, 2])
    front = pareto(points)
    assert front
    assert all(p.feasible for p in front)
    for p in front:
        for q in front:
            if q is p:
                continue
            dominated = (q.system.tops >= p.system.tops
                         and q.system.tops_per_w >= p.system.tops_per_w
                         and q.system.area_mm2 <= p.system.area_mm2
                         and (q.system.tops > p.system.tops
                              or q.system.tops_per_w > p.system.tops_per_w
                              or q.system.area_mm2 < p.system.area_mm2))
            assert not dominated


def test_pareto_keeps_max_throughput_point(tiny_frozen):
    points = sweep(tiny_frozen, [1.0, 2.0, 3.0], [0, 1])
    best = max((p for p in points if p.feasible), key=lambda p: p.system.tops)
    assert best in pareto(points)


def test_pareto_excludes_infeasible(tiny_frozen):
    points = sweep(tiny_frozen, [0.50], [0])  # single infeasible point
    assert pareto(points) == []


def test_pareto_rejects_empty():
    with pytest.raises(ValueError):
        pareto([])


def test_pareto_sorted_by_area(tiny_frozen):
    front = pareto(sweep(tiny_frozen, [0.6, 1.2, 2.4], [0, 1, 2]))
    areas = [p.system.area_mm2 for p in front]
    assert areas == sorted(areas)


def test_relative_metrics_against_same_silicon_baseline(mobilenet_frozen):
    """The headline comparison: at a fixed 3 mm² budget, moving depth into
    the fixed front end must never hurt throughput per watt."""
    points = sweep(mobilenet_frozen, [3.0], [0, 4, 7, 11])
    points.sort(key=lambda p: p.n_fixed)
    base = points[0].system
    for p in points[1:]:
        assert p.system.tops_per_w > base.tops_per_w
        assert math.isclose(p.system.area_mm2, 3.0, rel_tol=1e-9)
