"""Verilog emission: golden files, determinism, and structure.

The golden trees under tests/golden/ pin the exact bytes produced for
the three reference netlists. Regenerate them deliberately with
scripts/update_golden_rtl.py; a diff here means emission semantics
changed and the new output must be re-reviewed by hand.
"""

import re
import shutil
import subprocess
from dataclasses import replace
from pathlib import Path

import pytest

from fixynn.model import ConfigurationError
from fixynn.rtl import emit_testbench, emit_verilog, write_files

from golden_nets import REFERENCE_NETLISTS, TB_SEED, TB_VECTORS

GOLDEN = Path(__file__).parent / "golden"


def _emit_all(name):
    nl = REFERENCE_NETLISTS[name]()
    files = emit_verilog(nl)
    files.update(emit_testbench(nl, TB_VECTORS, TB_SEED))
    return nl, files


# ------------------------------------------------------------ golden bytes

@pytest.mark.parametrize("name", sorted(REFERENCE_NETLISTS))
def test_emission_matches_golden(name):
    _, files = _emit_all(name)
    root = GOLDEN / name
    on_disk = {str(p.relative_to(root)) for p in root.rglob("*") if p.is_file()}
    assert set(files) == on_disk
    for rel, text in files.items():
        assert text == (root / rel).read_text(), f"{name}/{rel} drifted"


@pytest.mark.parametrize("name", sorted(REFERENCE_NETLISTS))
def test_emission_is_deterministic(name):
    # two independent build+emit passes, byte-identical output
    _, first = _emit_all(name)
    _, second = _emit_all(name)
    assert first == second


def test_write_files_round_trip(tmp_path):
    _, files = _emit_all("stem8")
    write_files(tmp_path, files)
    for rel, text in files.items():
        assert (tmp_path / rel).read_text() == text


# ------------------------------------------------- structure of the output

_TERM = re.compile(r"8'sh([0-9a-f]{2}) \* win\[(\d+)\]")
_ACC = re.compile(r"wire signed \[31:0\] acc_(\d+) =(.*?);", re.S)


def test_weight_terms_reconstruct_multipliers():
    """Every constant multiplication in the text maps back to exactly one
    netlist multiplier: weight, window position, and channels all agree."""
    nl, files = _emit_all("pair12")
    for si, stage in enumerate(nl.stages):
        text = files[f"rtl/ffe_stage_{si}.v"]
        k, cin = stage.kernel, stage.in_channels
        seen = set()
        for cm in _ACC.finditer(text):
            c = int(cm.group(1))
            for hexw, idx in _TERM.findall(cm.group(2)):
                w = int(hexw, 16)
                w = w - 256 if w >= 128 else w
                idx = int(idx)
                ci = idx % cin
                ky, kx = divmod(idx // cin, k)
                seen.add((c, ky, kx, ci, w))
        want = {(m.out_channel, m.ky, m.kx, m.in_channel, m.weight)
                for m in stage.multipliers}
        assert seen == want


def test_pruned_weight_emits_no_multiplier():
    nl, files = _emit_all("stem8")
    stage = nl.stages[0]
    dense = stage.kernel * stage.kernel * stage.in_channels * stage.out_channels
    text = files["rtl/ffe_stage_0.v"]
    assert text.count("* win[") == stage.multiplier_count < dense


def test_single_multiplier_stage():
    nl = REFERENCE_NETLISTS["baked6"]()
    stage = replace(nl.stages[0], multipliers=(nl.stages[0].multipliers[0],))
    one = replace(nl, stages=(stage,))
    text = emit_verilog(one)["rtl/ffe_stage_0.v"]
    assert text.count("* win[") == 1
    assert "1 constant multipliers" in text.splitlines()[0]


def test_fully_pruned_channel_is_constant_zero():
    _, files = _emit_all("baked6")
    assert "acc_1 = 32'sd0;  // fully pruned channel" in files["rtl/ffe_stage_0.v"]


def test_tap_ports_and_strobes():
    _, files = _emit_all("pair12")
    top = files["rtl/ffe_top.v"]
    assert "output wire tap1_valid," in top
    assert "output wire [23:0] tap1_data" in top
    assert "assign tap1_valid = s0_valid & s0_ready;" in top
    assert "assign tap1_data = s0_data;" in top


def test_bn_ports_present_only_when_programmable():
    _, prog_files = _emit_all("pair12")
    _, baked_files = _emit_all("baked6")
    assert "bn_we" in prog_files["rtl/ffe_stage_0.v"]
    assert "bn_we" in prog_files["rtl/ffe_top.v"]
    assert "bn_we" not in baked_files["rtl/ffe_stage_0.v"]
    assert "bn_we" not in baked_files["rtl/ffe_top.v"]
    # baked constants appear inline in the pipeline stage
    assert "bn_m[" not in baked_files["rtl/ffe_stage_0.v"]


def test_empty_netlist_is_passthrough():
    from golden_nets import _freeze_graph
    from fixynn.model import Graph, LayerKind, LayerSpec
    from fixynn.netlist import FreezeSpec

    g = Graph((8, 8, 3), (
        LayerSpec(LayerKind.FULL_CONV, 3, 4, 3, stride=2, has_bn=True,
                  has_relu=True),
        LayerSpec(LayerKind.AVG_POOL, 4, 4, 4),
        LayerSpec(LayerKind.FULLY_CONNECTED, 4, 3, 1),
    ))
    zero = _freeze_graph(g, 101, FreezeSpec(0))
    files = emit_verilog(zero)
    assert set(files) == {"rtl/ffe_top.v"}
    top = files["rtl/ffe_top.v"]
    assert "assign out_data = in_data;" in top
    assert "ffe_stage" not in top
    tb = emit_testbench(zero, 2, 5)
    assert "ffe_top dut" in tb["tb/ffe_tb.v"]


def test_negative_vector_count_rejected():
    nl = REFERENCE_NETLISTS["baked6"]()
    with pytest.raises(ConfigurationError):
        emit_testbench(nl, -1, 0)


# ------------------------------------------------------------- hex vectors

def test_stimulus_and_expected_line_counts():
    nl, files = _emit_all("pair12")
    n_stim = len(files["tb/stimulus.hex"].splitlines())
    n_out = len(files["tb/expected.hex"].splitlines())
    n_tap = len(files["tb/expected_tap1.hex"].splitlines())
    oh, ow, _ = nl.output_shape
    assert n_stim == TB_VECTORS * nl.input_h * nl.input_w
    assert n_out == TB_VECTORS * oh * ow
    s0 = nl.stages[0]
    assert n_tap == TB_VECTORS * s0.out_h * s0.out_w


def test_hex_pixel_packing_is_little_endian():
    """Channel 0 occupies the rightmost two hex digits of each line."""
    import numpy as np
    nl, files = _emit_all("pair12")
    rng = np.random.default_rng(TB_SEED)
    frames = rng.integers(-128, 128,
                          size=(TB_VECTORS, nl.input_h, nl.input_w,
                                nl.input_channels), dtype=np.int8)
    first = frames[0, 0, 0]
    line0 = files["tb/stimulus.hex"].splitlines()[0]
    assert line0 == f"{int(first[1]) & 0xff:02x}{int(first[0]) & 0xff:02x}"


def test_tb_readmem_paths_are_bare_filenames():
    # the bench is meant to run from inside tb/, so no directory prefixes
    _, files = _emit_all("pair12")
    tb = files["tb/ffe_tb.v"]
    assert '$readmemh("stimulus.hex", stim);' in tb
    assert '$readmemh("expected.hex", expected);' in tb
    assert '$readmemh("expected_tap1.hex", expected_tap1);' in tb
    assert "tb/" not in tb


# ------------------------------------------------ optional tool validation

_IVERILOG = shutil.which("iverilog")
_SVLINT = shutil.which("svlint")


@pytest.mark.skipif(_IVERILOG is None, reason="iverilog not installed")
@pytest.mark.parametrize("name", sorted(REFERENCE_NETLISTS))
def test_golden_testbench_passes_in_simulation(name, tmp_path):
    _, files = _emit_all(name)
    write_files(tmp_path, files)
    sources = sorted(str(p) for p in (tmp_path / "rtl").glob("*.v"))
    sources.append(str(tmp_path / "tb" / "ffe_tb.v"))
    subprocess.run([_IVERILOG, "-g2001", "-o", "tb.vvp", *sources],
                   cwd=tmp_path / "tb", check=True)
    out = subprocess.run(["vvp", "tb.vvp"], cwd=tmp_path / "tb",
                         check=True, capture_output=True, text=True).stdout
    assert "PASS" in out and "MISMATCH" not in out


@pytest.mark.skipif(_SVLINT is None, reason="svlint not installed")
@pytest.mark.parametrize("name", sorted(REFERENCE_NETLISTS))
def test_golden_rtl_parses(name, tmp_path):
    _, files = _emit_all(name)
    write_files(tmp_path, files)
    cfg = tmp_path / "empty.toml"
    cfg.write_text("")  # no rules enabled: parse check only
    for src in sorted((tmp_path / "rtl").glob("*.v")):
        subprocess.run([_SVLINT, "--config", str(cfg), str(src)], check=True)
