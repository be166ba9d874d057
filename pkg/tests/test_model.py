import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixynn.model import (ConfigurationError, Graph, LayerKind, LayerSpec,
                          build_mobilenet, count_macs, count_params,
                          fixed_ops_fraction, random_bundle, same_padding)

# Frozen reference values, hand-derived from the layer table (see
# scripts/calibrate_cost_model.py for the pipeline that consumes them).
MN025_MACS = 41_030_272
MN025_PARAMS = 464_600
MN025_FIRST_CONV_MACS = 2_709_504
MN100_MACS = 568_740_352
MN100_PARAMS = 4_210_088


def test_mobilenet_quarter_reference_counts():
    g = build_mobilenet(0.25, 224)
    assert count_macs(g).total == MN025_MACS
    assert count_macs(g).per_layer[0] == MN025_FIRST_CONV_MACS
    assert count_params(g).total == MN025_PARAMS


def test_mobilenet_full_reference_counts():
    g = build_mobilenet(1.0, 224)
    assert count_macs(g).total == MN100_MACS
    assert count_params(g).total == MN100_PARAMS


def test_mobilenet_structure():
    g = build_mobilenet(0.25, 224)
    # 1 full conv + 13 dw/pw blocks + pool + fc
    assert len(g.layers) == 1 + 26 + 2
    assert g.n_fixable_units == 14
    assert g.layers[0].out_channels == 8     # 32 * 0.25
    assert g.layers[-1].out_channels == 1000
    shapes = g.layer_shapes()
    assert shapes[0] == (224, 224, 3)
    assert shapes[1] == (112, 112, 8)
    assert shapes[-2] == (1, 1, 256)


def test_mobilenet_channel_rounding():
    # channels = max(1, floor(c * wm + 0.5)) at every width
    g50 = build_mobilenet(0.5, 224)
    assert g50.layers[0].out_channels == 16
    g75 = build_mobilenet(0.75, 224)
    assert g75.layers[0].out_channels == 24
    assert g75.layers[1].out_channels == 24  # dw keeps channels
    assert g75.layers[2].out_channels == 48


def test_mobilenet_rejects_bad_inputs():
    with pytest.raises(ConfigurationError):
        build_mobilenet(0.3, 224)
    with pytest.raises(ConfigurationError):
        build_mobilenet(0.25, 100)   # not a multiple of 32


def test_fixed_ops_fraction_reference_points():
    g = build_mobilenet(0.25, 224)
    assert fixed_ops_fraction(g, 0) == 0.0
    assert fixed_ops_fraction(g, 4) == pytest.approx(0.27760, abs=5e-6)
    assert fixed_ops_fraction(g, 7) == pytest.approx(0.45339, abs=5e-6)
    assert fixed_ops_fraction(g, 11) == pytest.approx(0.78847, abs=5e-6)
    assert fixed_ops_fraction(g, 14) == pytest.approx(0.99376, abs=5e-6)


def test_fixed_ops_fraction_monotone_and_bounded():
    g = build_mobilenet(0.25, 224)
    fs = [fixed_ops_fraction(g, n) for n in range(g.n_fixable_units + 1)]
    assert all(b > a for a, b in zip(fs, fs[1:]))
    assert fs[-1] < 1.0  # the FC (and pool) always stay programmable
    with pytest.raises(ConfigurationError):
        fixed_ops_fraction(g, g.n_fixable_units + 1)


def test_prefix_units_stop_at_non_pair():
    layers = (
        LayerSpec(LayerKind.FULL_CONV, 3, 4, 3, stride=2, has_bn=True),
        LayerSpec(LayerKind.DEPTHWISE_CONV, 4, 4, 3, has_bn=True),
        LayerSpec(LayerKind.POINTWISE_CONV, 4, 8, 1, has_bn=True),
        # dw NOT followed by pw: prefix ends before it
        LayerSpec(LayerKind.DEPTHWISE_CONV, 8, 8, 3, has_bn=True),
        LayerSpec(LayerKind.AVG_POOL, 8, 8, 4),
        LayerSpec(LayerKind.FULLY_CONNECTED, 8, 4, 1),
    )
    g = Graph((8, 8, 3), layers)
    units = g.prefix_units()
    assert len(units) == 2
    assert units[0] == (0,)
    assert units[1] == (1, 2)


def test_same_padding_matches_convention():
    # k=3,s=1: symmetric 1/1. k=3,s=2 even input: 0 before, 1 after.
    assert same_padding(8, 3, 1) == (1, 1)
    assert same_padding(8, 3, 2) == (0, 1)
    assert same_padding(7, 3, 2) == (1, 1)
    assert same_padding(8, 1, 1) == (0, 0)
    assert same_padding(8, 1, 2) == (0, 0)


def test_layer_spec_validation():
    with pytest.raises(ConfigurationError):
        LayerSpec(LayerKind.DEPTHWISE_CONV, 4, 8, 3)  # dw must keep channels
    with pytest.raises(ConfigurationError):
        LayerSpec(LayerKind.POINTWISE_CONV, 4, 8, 3)  # pw is 1x1
    with pytest.raises(ConfigurationError):
        LayerSpec(LayerKind.FULL_CONV, 3, 8, 3, stride=3)


def test_graph_validation_catches_channel_mismatch():
    with pytest.raises(ConfigurationError):
        Graph((8, 8, 3), (
            LayerSpec(LayerKind.FULL_CONV, 3, 4, 3),
            LayerSpec(LayerKind.POINTWISE_CONV, 8, 4, 1),  # 4 != 8
            LayerSpec(LayerKind.AVG_POOL, 4, 4, 8),
            LayerSpec(LayerKind.FULLY_CONNECTED, 4, 2, 1),
        ))


def test_graph_requires_flat_fc_input():
    with pytest.raises(ConfigurationError):
        Graph((8, 8, 3), (
            LayerSpec(LayerKind.FULL_CONV, 3, 4, 3),
            LayerSpec(LayerKind.FULLY_CONNECTED, 4, 2, 1),  # 8x8 into FC
        ))


@given(st.integers(1, 64), st.sampled_from([1, 3, 5]), st.sampled_from([1, 2]))
def test_same_padding_produces_ceil_div_output(size, k, s):
    before, after = same_padding(size, k, s)
    padded = before + size + after
    out = (padded - k) // s + 1
    assert out == -(-size // s)
    assert 0 <= before <= after <= k  # begin = total//2 convention


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_random_bundle_is_deterministic_and_valid(seed):
    g = build_mobilenet(0.25, 32)
    b1 = random_bundle(g, seed)
    b2 = random_bundle(g, seed)
    for i in b1.weights:
        np.testing.assert_array_equal(b1.weights[i], b2.weights[i])
    b1.validate()


def test_macs_scale_with_resolution():
    # conv MACs scale with spatial area; FC does not
    g224 = build_mobilenet(0.25, 224)
    g448 = build_mobilenet(0.25, 448)
    m224, m448 = count_macs(g224), count_macs(g448)
    assert m448.per_layer[0] == 4 * m224.per_layer[0]
    assert m448.per_layer[-1] == m224.per_layer[-1]
