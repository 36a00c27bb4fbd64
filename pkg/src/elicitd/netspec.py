"""Network architecture descriptions.

A ``NetworkSpec`` is an ordered stack of layer descriptors ending in exactly
one output head. Specs are immutable, validated on construction, and
round-trip through a JSON document.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

from .errors import DomainError, SchemaError, ShapeError

Shape = tuple[int, ...]


@dataclass(frozen=True)
class Dense:
    in_features: int
    out_features: int


@dataclass(frozen=True)
class Conv2d:
    """Valid-padding 2-D convolution on (H, W, C) activations."""

    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class Dropout:
    rate: float


@dataclass(frozen=True)
class Residual:
    """Additive shortcut around an inner stack that preserves shape."""

    inner: tuple


@dataclass(frozen=True)
class SigmoidHead:
    pass


@dataclass(frozen=True)
class SoftmaxHead:
    k: int


Layer = Union[Dense, Conv2d, Relu, Dropout, Residual, SigmoidHead, SoftmaxHead]

_HEADS = (SigmoidHead, SoftmaxHead)


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    input_shape: Shape

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        validate_spec(self)

    def to_json(self) -> str:
        return json.dumps(spec_to_dict(self), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "NetworkSpec":
        return spec_from_dict(json.loads(text))


def layer_output_shape(layer: Layer, in_shape: Shape) -> Shape:
    """Shape produced by ``layer`` on input of ``in_shape``.

    Dense layers flatten their input (row-major), so they accept any shape
    whose total size equals ``in_features``. All other layers require an
    exact shape match.
    """
    if isinstance(layer, Dense):
        if math.prod(in_shape) != layer.in_features:
            raise ShapeError(
                f"dense expects {layer.in_features} features, got shape {in_shape}"
            )
        return (layer.out_features,)
    if isinstance(layer, Conv2d):
        if len(in_shape) != 3 or in_shape[2] != layer.in_channels:
            raise ShapeError(f"conv2d expects (H, W, {layer.in_channels}), got {in_shape}")
        h, w, _ = in_shape
        k, s = layer.kernel, layer.stride
        if h < k or w < k:
            raise ShapeError(f"conv2d kernel {k} larger than input {in_shape}")
        return ((h - k) // s + 1, (w - k) // s + 1, layer.out_channels)
    if isinstance(layer, Residual):
        shape = in_shape
        for inner in layer.inner:
            shape = layer_output_shape(inner, shape)
        if shape != in_shape:
            raise ShapeError(
                f"residual inner stack maps {in_shape} to {shape}; shortcut needs identity shape"
            )
        return in_shape
    if isinstance(layer, SigmoidHead):
        if math.prod(in_shape) != 1:
            raise ShapeError(f"sigmoid head expects a single logit, got shape {in_shape}")
        return (1,)
    if isinstance(layer, SoftmaxHead):
        if math.prod(in_shape) != layer.k:
            raise ShapeError(f"softmax head expects {layer.k} logits, got shape {in_shape}")
        return (layer.k,)
    # Relu / Dropout are shape-preserving
    return in_shape


def infer_shapes(spec: NetworkSpec) -> list[Shape]:
    """Per-layer output shapes, starting from ``spec.input_shape``."""
    shapes = []
    shape = spec.input_shape
    for layer in spec.layers:
        shape = layer_output_shape(layer, shape)
        shapes.append(shape)
    return shapes


def _check_rates_and_heads(layers: tuple, top_level: bool) -> None:
    for i, layer in enumerate(layers):
        if isinstance(layer, Dropout):
            if not (0.0 <= layer.rate < 1.0):
                raise DomainError(f"dropout rate must satisfy 0 <= q < 1, got {layer.rate}")
        elif isinstance(layer, Residual):
            _check_rates_and_heads(layer.inner, top_level=False)
        elif isinstance(layer, _HEADS):
            if not top_level:
                raise ShapeError("output heads are not allowed inside residual blocks")
            if i != len(layers) - 1:
                raise ShapeError("the output head must be the final layer")


def validate_spec(spec: NetworkSpec) -> None:
    """Raise if the network description violates any structural invariant."""
    if not spec.layers:
        raise ShapeError("network needs at least an output head")
    if not isinstance(spec.layers[-1], _HEADS):
        raise ShapeError("network must end in exactly one output head")
    n_heads = sum(isinstance(l, _HEADS) for l in spec.layers)
    if n_heads != 1:
        raise ShapeError(f"exactly one output head required, found {n_heads}")
    if any(d <= 0 for d in spec.input_shape) or not spec.input_shape:
        raise ShapeError(f"invalid input shape {spec.input_shape}")
    _check_rates_and_heads(spec.layers, top_level=True)
    infer_shapes(spec)  # raises ShapeError on any chain break


def dropout_rates(spec: NetworkSpec) -> list[float]:
    """All dropout rates in layer order, recursing into residual blocks."""
    rates: list[float] = []

    def walk(layers):
        for layer in layers:
            if isinstance(layer, Dropout):
                rates.append(layer.rate)
            elif isinstance(layer, Residual):
                walk(layer.inner)

    walk(spec.layers)
    return rates


def _layer_to_dict(layer: Layer) -> dict:
    if isinstance(layer, Dense):
        return {"type": "dense", "in": layer.in_features, "out": layer.out_features}
    if isinstance(layer, Conv2d):
        return {
            "type": "conv2d",
            "in_ch": layer.in_channels,
            "out_ch": layer.out_channels,
            "kernel": layer.kernel,
            "stride": layer.stride,
        }
    if isinstance(layer, Relu):
        return {"type": "relu"}
    if isinstance(layer, Dropout):
        return {"type": "dropout", "rate": layer.rate}
    if isinstance(layer, Residual):
        return {"type": "residual", "inner": [_layer_to_dict(l) for l in layer.inner]}
    if isinstance(layer, SigmoidHead):
        return {"type": "sigmoid_head"}
    if isinstance(layer, SoftmaxHead):
        return {"type": "softmax_head", "k": layer.k}
    raise SchemaError(f"unknown layer {layer!r}")


def _layer_from_dict(d: dict) -> Layer:
    try:
        kind = d["type"]
    except (KeyError, TypeError):
        raise SchemaError(f"layer descriptor missing 'type': {d!r}")
    try:
        if kind == "dense":
            return Dense(int(d["in"]), int(d["out"]))
        if kind == "conv2d":
            return Conv2d(int(d["in_ch"]), int(d["out_ch"]), int(d["kernel"]), int(d.get("stride", 1)))
        if kind == "relu":
            return Relu()
        if kind == "dropout":
            return Dropout(float(d["rate"]))
        if kind == "residual":
            return Residual(tuple(_layer_from_dict(x) for x in d["inner"]))
        if kind == "sigmoid_head":
            return SigmoidHead()
        if kind == "softmax_head":
            return SoftmaxHead(int(d["k"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaError(f"bad {kind} layer descriptor {d!r}: {exc}")
    raise SchemaError(f"unknown layer type {kind!r}")


def spec_to_dict(spec: NetworkSpec) -> dict:
    return {
        "input_shape": list(spec.input_shape),
        "layers": [_layer_to_dict(l) for l in spec.layers],
    }


def spec_from_dict(d: dict) -> NetworkSpec:
    try:
        raw_layers = d["layers"]
        raw_shape = d["input_shape"]
    except (KeyError, TypeError):
        raise SchemaError("network spec needs 'layers' and 'input_shape'")
    layers = tuple(_layer_from_dict(x) for x in raw_layers)
    return NetworkSpec(layers=layers, input_shape=tuple(int(x) for x in raw_shape))


def residual_mlp_spec(
    input_dim: int,
    width: int = 16,
    blocks: int = 2,
    dropout_rate: float = 0.2,
) -> NetworkSpec:
    """Default desk-scale architecture: dense residual blocks with dropout
    after each shortcut addition, ending in a sigmoid head.
    """
    layers: list[Layer] = [Dense(input_dim, width), Relu()]
    for _ in range(blocks):
        inner = (Dense(width, width), Relu(), Dense(width, width))
        layers.append(Residual(inner))
        layers.append(Dropout(dropout_rate))
        layers.append(Relu())
    layers.append(Dense(width, 1))
    layers.append(SigmoidHead())
    return NetworkSpec(layers=tuple(layers), input_shape=(input_dim,))
