import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_frozen, make_prefix_graph, oracle_forward
from fixynn.compress import BnRegisters
from fixynn.model import Graph, LayerKind, LayerSpec
from fixynn.refexec import (AccumulatorOverflow, infer, requantize,
                            rhte_shift, tap)


# ------------------------------------------------- requantize unit tests

def test_requantize_zero():
    assert requantize(0, 1, 3) == 0


def test_requantize_simple_shift():
    # 20 * 1 = 20; 20 >> 3 = 2.5 -> rounds to even 2
    assert requantize(20, 1, 3) == 2


def test_requantize_saturates_both_ends():
    assert requantize(10_000, 1000, 3) == 127
    assert requantize(-10_000, 1000, 3) == -128


def test_requantize_rounds_half_to_even():
    assert requantize(12, 1, 3) == 2    # 1.5 -> 2
    assert requantize(20, 1, 3) == 2    # 2.5 -> 2
    assert requantize(28, 1, 3) == 4    # 3.5 -> 4
    assert requantize(-12, 1, 3) == -2  # -1.5 -> -2
    assert requantize(-20, 1, 3) == -2  # -2.5 -> -2


def test_rhte_shift_matches_float_reference():
    for t in range(-2048, 2049):
        for r in (1, 3, 7):
            want = round(t / (1 << r))  # python round = half-to-even
            assert rhte_shift(t, r) == want, (t, r)


@given(st.integers(-2**40, 2**40), st.integers(1, 31))
def test_rhte_shift_array_agrees_with_scalar(t, r):
    arr = rhte_shift(np.array([t], dtype=np.int64), r)
    assert int(arr[0]) == rhte_shift(t, r)


# ------------------------------------------------- single-layer behaviour

def test_identity_conv_passes_values_through_exactly():
    """1x1 conv with weight 64*2^-7 and an output scale chosen so the
    whole requant chain collapses to out = x."""
    from fixynn.compress import FrozenModel, QuantizedTensor
    img = 5
    layers = (
        LayerSpec(LayerKind.FULL_CONV, 1, 1, 1, has_bn=False, has_relu=False),
        LayerSpec(LayerKind.AVG_POOL, 1, 1, img),
        LayerSpec(LayerKind.FULLY_CONNECTED, 1, 2, 1),
    )
    g = Graph((img, img, 1), layers)
    w = np.full((1, 1, 1, 1), 64, dtype=np.int8)
    qw = {0: QuantizedTensor(w, -7),
          2: QuantizedTensor(np.ones((1, 2), dtype=np.int8), 0)}
    e_in = -7
    e_acc = e_in + (-7)
    # out = rhte((x*64) * m >> r) with identity m = 2^(r + e_acc - e_out);
    # e_out = e_acc + 6 makes out = x*64/64 = x with no rounding at all
    frozen = FrozenModel(graph=g, qweights=qw, input_exponent=e_in,
                         act_exponents=(e_acc + 6, e_acc + 6, e_acc + 6),
                         bn_shifts={0: 8, 1: 8})
    rng = np.random.default_rng(1)
    x = rng.integers(-128, 128, size=(img, img, 1), dtype=np.int8)
    out = infer(frozen, x).activations[0].values
    np.testing.assert_array_equal(out, x)


def test_infer_matches_bruteforce_oracle_small_net():
    rng = np.random.default_rng(0)
    graph = make_prefix_graph(rng, 2, max_ch=5, img=8)
    frozen = make_frozen(graph, seed=1)
    img = rng.integers(-128, 128, size=graph.input_shape, dtype=np.int8)
    got = infer(frozen, img)
    acts, logits = oracle_forward(frozen, img)
    for i, ref in enumerate(acts):
        if ref is None:
            continue
        np.testing.assert_array_equal(
            got.activations[i].values, np.array(ref, dtype=np.int8),
            err_msg=f"layer {i}")
    np.testing.assert_array_equal(got.logits, np.array(logits, dtype=np.int32))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_infer_matches_oracle_random_nets(seed):
    rng = np.random.default_rng(seed)
    graph = make_prefix_graph(rng, int(rng.integers(1, 3)), max_ch=4, img=6)
    frozen = make_frozen(graph, seed=seed % 997)
    img = rng.integers(-128, 128, size=graph.input_shape, dtype=np.int8)
    got = infer(frozen, img)
    acts, logits = oracle_forward(frozen, img)
    np.testing.assert_array_equal(got.logits, np.array(logits, dtype=np.int32))
    for i, ref in enumerate(acts):
        if ref is not None:
            np.testing.assert_array_equal(got.activations[i].values,
                                          np.array(ref, dtype=np.int8))


def test_infer_rejects_wrong_shape():
    rng = np.random.default_rng(2)
    graph = make_prefix_graph(rng, 1, img=8)
    frozen = make_frozen(graph, seed=2)
    bad = np.zeros((4, 4, graph.input_shape[2]), dtype=np.int8)
    with pytest.raises(Exception):
        infer(frozen, bad)


def test_infer_rejects_non_int8():
    rng = np.random.default_rng(3)
    graph = make_prefix_graph(rng, 1, img=8)
    frozen = make_frozen(graph, seed=3)
    bad = np.zeros(graph.input_shape, dtype=np.int16)
    with pytest.raises(Exception):
        infer(frozen, bad)


def test_tap_equals_prefix_of_full_run():
    rng = np.random.default_rng(4)
    graph = make_prefix_graph(rng, 3, max_ch=4, img=8)
    frozen = make_frozen(graph, seed=4)
    img = rng.integers(-128, 128, size=graph.input_shape, dtype=np.int8)
    full = infer(frozen, img)
    units = graph.prefix_units()
    for k in range(1, len(units) + 1):
        boundary_layer = units[k - 1][-1]
        t = tap(frozen, img, k)
        np.testing.assert_array_equal(t.values,
                                      full.activations[boundary_layer].values)
        assert t.scale_exponent == frozen.act_exponents[boundary_layer]


def test_tap_rejects_out_of_range():
    rng = np.random.default_rng(5)
    graph = make_prefix_graph(rng, 1, img=8)
    frozen = make_frozen(graph, seed=5)
    img = np.zeros(graph.input_shape, dtype=np.int8)
    with pytest.raises(Exception):
        tap(frozen, img, 0)
    with pytest.raises(Exception):
        tap(frozen, img, 2)


def test_register_override_changes_output():
    rng = np.random.default_rng(6)
    graph = make_prefix_graph(rng, 1, max_ch=4, img=8)
    frozen = make_frozen(graph, seed=6)
    img = rng.integers(-128, 128, size=graph.input_shape, dtype=np.int8)
    base = infer(frozen, img)
    regs = frozen.requant_registers(0)
    doubled = BnRegisters(multiplier=np.minimum(regs.multiplier * 2, 2**15 - 1)
                          .astype(np.int32),
                          bias=regs.bias, shift=regs.shift)
    changed = infer(frozen, img, register_override={0: doubled})
    assert not np.array_equal(base.activations[0].values,
                              changed.activations[0].values)


def test_requantize_guards_the_64bit_intermediate():
    with pytest.raises(AccumulatorOverflow):
        requantize(2**33, 2**31, 1)
    with pytest.raises(AccumulatorOverflow):
        requantize(np.array([2**33]), 2**31, 1)


def test_layer_accumulator_checked_against_32_bits():
    from fixynn.refexec import _check_acc
    ok = np.array([[2**31 - 1, -(2**31)]], dtype=np.int64)
    np.testing.assert_array_equal(_check_acc(ok, 0), ok)
    with pytest.raises(AccumulatorOverflow):
        _check_acc(np.array([2**31], dtype=np.int64), 3)
    with pytest.raises(AccumulatorOverflow):
        _check_acc(np.array([-(2**31) - 1], dtype=np.int64), 3)


def test_relu_clamps_negative_activations():
    rng = np.random.default_rng(8)
    # force_stride=1 keeps spatial comparisons easy; relu on layer 0
    graph = make_prefix_graph(rng, 1, max_ch=3, img=6, force_stride=1)
    if not graph.layers[0].has_relu:
        layers = (graph.layers[0].__class__(
            graph.layers[0].kind, graph.layers[0].in_channels,
            graph.layers[0].out_channels, graph.layers[0].kernel,
            stride=graph.layers[0].stride, has_bn=True, has_relu=True),
        ) + graph.layers[1:]
        graph = Graph(graph.input_shape, layers)
    frozen = make_frozen(graph, seed=8)
    img = rng.integers(-128, 128, size=graph.input_shape, dtype=np.int8)
    out = infer(frozen, img).activations[0].values
    assert (out >= 0).all()
