"""On-disk model formats.

Three artifacts:
  * manifest — JSON: input shape, layer records, weight-blob filename, and
    (for frozen models) a quantization section with activation exponents.
  * weight blob — binary, magic "FXNN": per-tensor records keyed by layer
    index and role. int8 records carry their power-of-two scale exponent.
  * tensor file — raw dims header + int8 payload, used for CLI inputs,
    calibration batches, and dumped taps.

All multi-byte fields are little-endian.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import ConfigurationError, Graph, LayerKind, LayerSpec, ModelBundle

MAGIC = b"FXNN"
BLOB_VERSION = 1

ROLE_WEIGHT = 0
ROLE_BN_SCALE = 1
ROLE_BN_BIAS = 2
ROLE_FC_BIAS = 3
_ROLE_NAMES = {ROLE_WEIGHT: "weight", ROLE_BN_SCALE: "bn_scale",
               ROLE_BN_BIAS: "bn_bias", ROLE_FC_BIAS: "fc_bias"}

DTYPE_F32 = 0
DTYPE_I8 = 1


class FormatError(ValueError):
    """Corrupt or inconsistent on-disk artifact."""


# ---------------------------------------------------------------- manifest

def graph_to_manifest(graph: Graph, weights_filename: str,
                      quantization: dict | None = None) -> dict:
    doc = {
        "format_version": 1,
        "input_shape": list(graph.input_shape),
        "layers": [
            {
                "kind": layer.kind.value,
                "in_channels": layer.in_channels,
                "out_channels": layer.out_channels,
                "kernel": layer.kernel,
                "stride": layer.stride,
                "bn": layer.has_bn,
                "relu": layer.has_relu,
            }
            for layer in graph.layers
        ],
        "weights": weights_filename,
    }
    if quantization is not None:
        doc["quantization"] = quantization
    return doc


def manifest_to_graph(doc: dict) -> Graph:
    try:
        layers = tuple(
            LayerSpec(
                kind=LayerKind(rec["kind"]),
                in_channels=int(rec["in_channels"]),
                out_channels=int(rec["out_channels"]),
                kernel=int(rec["kernel"]),
                stride=int(rec.get("stride", 1)),
                has_bn=bool(rec.get("bn", False)),
                has_relu=bool(rec.get("relu", False)),
            )
            for rec in doc["layers"]
        )
        return Graph(tuple(int(x) for x in doc["input_shape"]), layers)
    except (KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise FormatError(f"bad manifest: {exc}") from exc


def write_manifest(path: str | Path, graph: Graph, weights_filename: str,
                   quantization: dict | None = None) -> None:
    doc = graph_to_manifest(graph, weights_filename, quantization)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_manifest(path: str | Path) -> tuple[Graph, str, dict | None]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "layers" not in doc:
        raise FormatError(f"{path}: not a model manifest")
    return manifest_to_graph(doc), doc.get("weights", ""), doc.get("quantization")


# ------------------------------------------------------------- weight blob

def _dtype_tag(arr: np.ndarray) -> int:
    if arr.dtype == np.float32:
        return DTYPE_F32
    if arr.dtype == np.int8:
        return DTYPE_I8
    raise FormatError(f"unsupported blob dtype {arr.dtype}")


def write_blob(path: str | Path, records: list[tuple[int, int, np.ndarray, int | None]]) -> None:
    """records: (layer_index, role, array, scale_exponent or None for f32)."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", BLOB_VERSION)
    for layer_index, role, arr, exponent in records:
        arr = np.ascontiguousarray(arr)
        tag = _dtype_tag(arr)
        if (tag == DTYPE_I8) != (exponent is not None):
            raise FormatError("scale exponent must accompany int8 records only")
        out += struct.pack("<HBB", layer_index, role, arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += struct.pack("<B", tag)
        if tag == DTYPE_I8:
            out += struct.pack("<h", exponent)
        out += arr.astype("<f4" if tag == DTYPE_F32 else "int8").tobytes()
    Path(path).write_bytes(bytes(out))


def read_blob(path: str | Path) -> list[tuple[int, int, np.ndarray, int | None]]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != BLOB_VERSION:
        raise FormatError(f"{path}: unsupported blob version {version}")
    pos = 6
    records = []
    while pos < len(data):
        try:
            layer_index, role, rank = struct.unpack_from("<HBB", data, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            (tag,) = struct.unpack_from("<B", data, pos)
            pos += 1
            exponent = None
            if tag == DTYPE_I8:
                (exponent,) = struct.unpack_from("<h", data, pos)
                pos += 2
            n = int(np.prod(dims)) if dims else 1
            if tag == DTYPE_F32:
                arr = np.frombuffer(data, dtype="<f4", count=n, offset=pos).astype(np.float32)
                pos += 4 * n
            elif tag == DTYPE_I8:
                arr = np.frombuffer(data, dtype=np.int8, count=n, offset=pos).copy()
                pos += n
            else:
                raise FormatError(f"{path}: unknown dtype tag {tag}")
        except (struct.error, ValueError) as exc:
            raise FormatError(f"{path}: truncated blob: {exc}") from exc
        if arr.size != n:
            raise FormatError(f"{path}: truncated payload")
        records.append((layer_index, role, arr.reshape(dims), exponent))
    return records


# ------------------------------------------------------- float model bundle

def save_bundle(manifest_path: str | Path, bundle: ModelBundle,
                blob_filename: str | None = None) -> Path:
    """Write a float model as manifest + f32 blob next to it."""
    bundle.validate()
    manifest_path = Path(manifest_path)
    if blob_filename is None:
        blob_filename = manifest_path.stem + ".fxnn"
    records: list[tuple[int, int, np.ndarray, int | None]] = []
    for i, w in sorted(bundle.weights.items()):
        records.append((i, ROLE_WEIGHT, w.astype(np.float32), None))
    for i, (scale, bias) in sorted(bundle.bn_params.items()):
        records.append((i, ROLE_BN_SCALE, scale.astype(np.float32), None))
        records.append((i, ROLE_BN_BIAS, bias.astype(np.float32), None))
    for i, bias in sorted(bundle.fc_bias.items()):
        records.append((i, ROLE_FC_BIAS, bias.astype(np.float32), None))
    write_blob(manifest_path.parent / blob_filename, records)
    write_manifest(manifest_path, bundle.graph, blob_filename)
    return manifest_path


def load_bundle(manifest_path: str | Path) -> ModelBundle:
    manifest_path = Path(manifest_path)
    graph, blob_name, quant = read_manifest(manifest_path)
    if quant is not None:
        raise FormatError(f"{manifest_path}: frozen model, expected a float model")
    weights: dict[int, np.ndarray] = {}
    bn_scale: dict[int, np.ndarray] = {}
    bn_bias: dict[int, np.ndarray] = {}
    fc_bias: dict[int, np.ndarray] = {}
    for layer_index, role, arr, exponent in read_blob(manifest_path.parent / blob_name):
        if exponent is not None:
            raise FormatError("float bundle contains quantized records")
        if role == ROLE_WEIGHT:
            weights[layer_index] = arr
        elif role == ROLE_BN_SCALE:
            bn_scale[layer_index] = arr
        elif role == ROLE_BN_BIAS:
            bn_bias[layer_index] = arr
        elif role == ROLE_FC_BIAS:
            fc_bias[layer_index] = arr
        else:
            raise FormatError(f"unknown record role {role}")
    if set(bn_scale) != set(bn_bias):
        raise FormatError("bn_scale/bn_bias records do not pair up")
    bundle = ModelBundle(graph, weights,
                         {i: (bn_scale[i], bn_bias[i]) for i in bn_scale}, fc_bias)
    bundle.validate()
    return bundle


# ------------------------------------------------------------- tensor files

def write_tensor(path: str | Path, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values)
    if values.dtype != np.int8:
        raise FormatError(f"tensor files hold int8, got {values.dtype}")
    with open(path, "wb") as f:
        f.write(struct.pack("<B", values.ndim))
        f.write(struct.pack(f"<{values.ndim}I", *values.shape))
        f.write(values.tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    try:
        (rank,) = struct.unpack_from("<B", data, 0)
        dims = struct.unpack_from(f"<{rank}I", data, 1)
    except struct.error as exc:
        raise FormatError(f"{path}: truncated tensor header") from exc
    offset = 1 + 4 * rank
    n = int(np.prod(dims)) if dims else 1
    payload = np.frombuffer(data, dtype=np.int8, count=-1, offset=offset)
    if payload.size != n:
        raise FormatError(f"{path}: payload holds {payload.size} values, dims imply {n}")
    return payload.reshape(dims).copy()


def role_name(role: int) -> str:
    return _ROLE_NAMES.get(role, f"role_{role}")
