"""Trainable parameters: initialization and the ELND binary format.

Parameters are a flat tuple of float64 arrays in depth-first layer order;
each parametric layer contributes its weight tensor then its bias:

    dense   W (out, in),            b (out,)
    conv2d  W (out_ch, in_ch, k, k) b (out_ch,)

The on-disk format is ``ELND`` magic, a u16 format version, then per tensor
a u8 rank, u32 dims, and little-endian float64 values in row-major order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericsError
from .netspec import Conv2d, Dense, NetworkSpec, Residual

MAGIC = b"ELND"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class NetworkParams:
    tensors: tuple

    def __post_init__(self):
        object.__setattr__(self, "tensors", tuple(np.asarray(t, dtype=np.float64) for t in self.tensors))

    def check_finite(self) -> None:
        for t in self.tensors:
            if not np.all(np.isfinite(t)):
                raise NumericsError("non-finite parameter value")

    def copy(self) -> "NetworkParams":
        return NetworkParams(tuple(t.copy() for t in self.tensors))


def _parametric_layers(layers) -> list:
    out = []
    for layer in layers:
        if isinstance(layer, (Dense, Conv2d)):
            out.append(layer)
        elif isinstance(layer, Residual):
            out.extend(_parametric_layers(layer.inner))
    return out


def param_shapes(spec: NetworkSpec) -> list[tuple[int, ...]]:
    """Expected tensor shapes, in serialization order."""
    shapes = []
    for layer in _parametric_layers(spec.layers):
        if isinstance(layer, Dense):
            shapes.append((layer.out_features, layer.in_features))
            shapes.append((layer.out_features,))
        else:
            shapes.append((layer.out_channels, layer.in_channels, layer.kernel, layer.kernel))
            shapes.append((layer.out_channels,))
    return shapes


def init_params(spec: NetworkSpec, rng: np.random.Generator) -> NetworkParams:
    """Scaled uniform init: W ~ U(+-sqrt(6/(fan_in+fan_out))), biases zero."""
    tensors = []
    for layer in _parametric_layers(spec.layers):
        if isinstance(layer, Dense):
            fan_in, fan_out = layer.in_features, layer.out_features
            shape = (layer.out_features, layer.in_features)
            bias = layer.out_features
        else:
            k = layer.kernel
            fan_in = layer.in_channels * k * k
            fan_out = layer.out_channels * k * k
            shape = (layer.out_channels, layer.in_channels, k, k)
            bias = layer.out_channels
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        tensors.append(rng.uniform(-limit, limit, size=shape))
        tensors.append(np.zeros(bias))
    return NetworkParams(tuple(tensors))


def zeros_like(params: NetworkParams) -> NetworkParams:
    return NetworkParams(tuple(np.zeros_like(t) for t in params.tensors))


def params_to_bytes(params: NetworkParams) -> bytes:
    chunks = [MAGIC, struct.pack("<H", FORMAT_VERSION)]
    for t in params.tensors:
        chunks.append(struct.pack("<B", t.ndim))
        chunks.append(struct.pack(f"<{t.ndim}I", *t.shape))
        chunks.append(np.ascontiguousarray(t, dtype="<f8").tobytes())
    return b"".join(chunks)


def params_from_bytes(data: bytes) -> NetworkParams:
    if data[:4] != MAGIC:
        raise DataError("not an ELND parameter file (bad magic)")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported ELND format version {version}")
    offset = 6
    tensors = []
    while offset < len(data):
        (rank,) = struct.unpack_from("<B", data, offset)
        offset += 1
        dims = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        values = np.frombuffer(data, dtype="<f8", count=n, offset=offset)
        offset += 8 * n
        tensors.append(values.astype(np.float64).reshape(dims))
    return NetworkParams(tuple(tensors))


def save_params(params: NetworkParams, path) -> None:
    with open(path, "wb") as fh:
        fh.write(params_to_bytes(params))


def load_params(path, spec: NetworkSpec | None = None) -> NetworkParams:
    with open(path, "rb") as fh:
        params = params_from_bytes(fh.read())
    if spec is not None:
        expected = param_shapes(spec)
        actual = [t.shape for t in params.tensors]
        if [tuple(s) for s in expected] != actual:
            raise DataError(f"parameter shapes {actual} do not match spec {expected}")
    return params
