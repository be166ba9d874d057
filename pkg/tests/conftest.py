"""Shared fixtures: small random networks and a brute-force integer oracle.

The oracle is deliberately independent of the package's executor: plain
Python ints (arbitrary precision), no numpy arithmetic, no shared
helpers. Any disagreement between the two is a bug in one of them.
"""

import numpy as np
import pytest

from fixynn.compress import compress
from fixynn.model import Graph, LayerKind, LayerSpec, build_mobilenet, random_bundle


@pytest.fixture(scope="session")
def mobilenet_frozen():
    """MobileNet-0.25 @224, random weights, int8, 50% pruned. Session-scoped:
    several suites freeze prefixes of this one compressed model."""
    graph = build_mobilenet(0.25, 224)
    bundle = random_bundle(graph, 7)
    rng = np.random.default_rng(99)
    calib = rng.integers(-128, 128, size=(2, 224, 224, 3), dtype=np.int8)
    return compress(bundle, 0.5, 8, calib)


def make_prefix_graph(rng, n_units, max_ch=8, img=8, force_stride=None):
    """A net whose first n_units are fixable: FullConv then DW+PW pairs,
    closed with global AvgPool + FC so the graph is a complete classifier."""
    h = w = img
    c_in = int(rng.integers(1, 4))
    layers = []
    ch = int(rng.integers(1, max_ch + 1))
    for u in range(n_units):
        stride = force_stride or int(rng.choice([1, 2]))
        k = int(rng.choice([1, 3]) if u == 0 else 3)
        relu = bool(rng.integers(0, 2))
        if u == 0:
            layers.append(LayerSpec(LayerKind.FULL_CONV, c_in, ch, k,
                                    stride=stride, has_bn=True, has_relu=relu))
        else:
            prev = layers[-1].out_channels
            layers.append(LayerSpec(LayerKind.DEPTHWISE_CONV, prev, prev, 3,
                                    stride=stride, has_bn=True, has_relu=relu))
            layers.append(LayerSpec(LayerKind.POINTWISE_CONV, prev, ch, 1,
                                    has_bn=True, has_relu=bool(rng.integers(0, 2))))
        h = -(-h // stride)
        w = -(-w // stride)
        ch = int(rng.integers(1, max_ch + 1))
    last = layers[-1].out_channels
    layers.append(LayerSpec(LayerKind.AVG_POOL, last, last, h))
    layers.append(LayerSpec(LayerKind.FULLY_CONNECTED, last,
                            int(rng.integers(2, 6)), 1))
    return Graph((img, img, c_in), tuple(layers))


def make_frozen(graph, seed, sparsity=0.5, n_calib=3):
    rng = np.random.default_rng(seed + 1000)
    bundle = random_bundle(graph, seed)
    calib = rng.integers(-128, 128,
                         size=(n_calib,) + graph.input_shape, dtype=np.int8)
    return compress(bundle, sparsity, 8, calib)


@pytest.fixture
def tiny_frozen():
    rng = np.random.default_rng(42)
    graph = make_prefix_graph(rng, 2, max_ch=6, img=8)
    return make_frozen(graph, seed=42)


# --------------------------------------------------------------- oracle

def _oracle_requant(acc, mul, bias, shift, relu):
    t = acc * mul + bias
    half = 1 << (shift - 1)
    q, rem = t >> shift, t & ((1 << shift) - 1)
    if rem > half or (rem == half and (q & 1)):
        q += 1
    q = max(-128, min(127, q))
    return max(0, q) if relu else q


def oracle_forward(frozen, image):
    """Evaluate every layer with plain Python integers.

    Returns (activations, logits): one int nested-list per layer (None at
    the FC position), logits as a flat list of ints.
    """
    graph = frozen.graph
    x = [[[int(v) for v in row_c] for row_c in row] for row in image]
    acts = []
    logits = None
    for i, layer in enumerate(graph.layers):
        h, w, cin = len(x), len(x[0]), len(x[0][0])
        if layer.kind is LayerKind.FULLY_CONNECTED:
            wq = frozen.qweights[i]
            flat = x[0][0]
            logits = []
            for o in range(layer.out_channels):
                acc = sum(flat[j] * int(wq.values[j, o]) for j in range(cin))
                logits.append(acc + int(frozen.fc_bias_int(i)[o]))
            acts.append(None)
            continue
        regs = frozen.requant_registers(i)
        if layer.kind is LayerKind.AVG_POOL:
            out = [[[_oracle_requant(
                sum(x[r][c][ch] for r in range(h) for c in range(w)),
                int(regs.multiplier[ch]), int(regs.bias[ch]), regs.shift,
                layer.has_relu) for ch in range(cin)]]]
            x = out
            acts.append(out)
            continue
        wq = frozen.qweights[i]
        k, s = layer.kernel, layer.stride
        oh, ow = layer.out_spatial(h, w)
        pt = max((oh - 1) * s + k - h, 0) // 2
        pl = max((ow - 1) * s + k - w, 0) // 2
        out = []
        for oy in range(oh):
            row = []
            for ox in range(ow):
                pix = []
                for oc in range(layer.out_channels):
                    acc = 0
                    for ky in range(k):
                        for kx in range(k):
                            iy, ix = oy * s + ky - pt, ox * s + kx - pl
                            if not (0 <= iy < h and 0 <= ix < w):
                                continue
                            if layer.kind is LayerKind.DEPTHWISE_CONV:
                                acc += x[iy][ix][oc] * int(wq.values[ky, kx, oc])
                            else:
                                acc += sum(
                                    x[iy][ix][ic] * int(wq.values[ky, kx, ic, oc])
                                    for ic in range(cin))
                    assert -2**31 <= acc <= 2**31 - 1
                    pix.append(_oracle_requant(acc, int(regs.multiplier[oc]),
                                               int(regs.bias[oc]), regs.shift,
                                               layer.has_relu))
                row.append(pix)
            out.append(row)
        x = out
        acts.append(out)
    return acts, logits
