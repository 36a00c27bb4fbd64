"""Forward and backward passes for the from-scratch network.

All activations carry a leading batch axis and are float64. Gradients are
hand-derived per layer; there is no autodiff graph. Dropout is inverted
(surviving units scaled by 1/(1-q) at mask time), so Eval mode applies no
masks and needs no rescaling.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .errors import DataError, DomainError, NumericsError, ShapeError
from .netparams import NetworkParams
from .netspec import (
    Conv2d,
    Dense,
    Dropout,
    NetworkSpec,
    Relu,
    Residual,
    SigmoidHead,
    SoftmaxHead,
)

BCE_EPS = 1e-12


class Mode(enum.Enum):
    TRAIN = "train"
    EVAL = "eval"
    MC_SAMPLE = "mc_sample"


def sigmoid(z):
    """Overflow-safe logistic function, elementwise."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def softmax(z):
    """Probability vector from logits; shift-invariant via max subtraction."""
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0:
        raise ShapeError("softmax of an empty vector")
    e = np.exp(z - np.max(z, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def dropout_mask(n: int, q: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: entries are 0 w.p. q, else 1/(1-q)."""
    if not (0.0 <= q < 1.0):
        raise DomainError(f"dropout rate must satisfy 0 <= q < 1, got {q}")
    if q == 0.0:
        return np.ones(n)
    keep = rng.random(n) >= q
    return keep / (1.0 - q)


def bce_loss(p, y):
    """Binary cross entropy, elementwise; p clamped to [eps, 1-eps]."""
    p = np.clip(np.asarray(p, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    y = np.asarray(y, dtype=np.float64)
    out = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    if out.ndim == 0:
        return float(out)
    return out


def _mask(shape, q: float, rng: np.random.Generator) -> np.ndarray:
    keep = rng.random(shape) >= q
    return keep / (1.0 - q)


def _check_finite(z: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(z)):
        raise NumericsError(f"non-finite activation after {where}")


def _fwd_layers(layers, params, cursor, x, mode, rng, trace):
    """Run ``layers`` on batched input x; append (layer, cache) to trace.

    Returns (output, params cursor). ``trace`` may be None when no backward
    pass will follow.
    """
    for layer in layers:
        if isinstance(layer, Dense):
            w, b = params.tensors[cursor], params.tensors[cursor + 1]
            cursor += 2
            in_shape = x.shape[1:]
            x2 = x.reshape(x.shape[0], -1)
            if x2.shape[1] != layer.in_features:
                raise ShapeError(
                    f"dense expects {layer.in_features} features, got shape {in_shape}"
                )
            z = x2 @ w.T + b
            _check_finite(z, "dense")
            if trace is not None:
                trace.append((layer, (x2, in_shape)))
            x = z
        elif isinstance(layer, Conv2d):
            w, b = params.tensors[cursor], params.tensors[cursor + 1]
            cursor += 2
            x, cache = _conv_forward(layer, w, b, x)
            _check_finite(x, "conv2d")
            if trace is not None:
                trace.append((layer, cache))
        elif isinstance(layer, Relu):
            if trace is not None:
                trace.append((layer, x > 0))
            x = np.maximum(x, 0.0)
        elif isinstance(layer, Dropout):
            if mode is Mode.EVAL or layer.rate == 0.0:
                mask = None
            else:
                mask = _mask(x.shape, layer.rate, rng)
                x = x * mask
            if trace is not None:
                trace.append((layer, mask))
        elif isinstance(layer, Residual):
            inner_trace = [] if trace is not None else None
            inner_out, cursor = _fwd_layers(layer.inner, params, cursor, x, mode, rng, inner_trace)
            x = x + inner_out
            if trace is not None:
                trace.append((layer, inner_trace))
        elif isinstance(layer, SigmoidHead):
            in_shape = x.shape[1:]
            z = x.reshape(x.shape[0], 1)
            p = sigmoid(z)
            if trace is not None:
                trace.append((layer, (p, in_shape)))
            x = p
        elif isinstance(layer, SoftmaxHead):
            in_shape = x.shape[1:]
            z = x.reshape(x.shape[0], layer.k)
            p = softmax(z)
            if trace is not None:
                trace.append((layer, (p, in_shape)))
            x = p
        else:  # pragma: no cover - spec validation rejects unknown layers
            raise ShapeError(f"unknown layer {layer!r}")
    return x, cursor


def _conv_forward(layer: Conv2d, w, b, x):
    n, h, wd, c = x.shape
    k, s = layer.kernel, layer.stride
    if c != layer.in_channels:
        raise ShapeError(f"conv2d expects {layer.in_channels} channels, got {c}")
    # (N, H', W', C, k, k) windows, strided; flattened to match W's (C, k, k) order
    windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))[:, ::s, ::s]
    ho, wo = windows.shape[1], windows.shape[2]
    patches = windows.reshape(n, ho, wo, c * k * k)
    wf = w.reshape(layer.out_channels, c * k * k)
    out = patches @ wf.T + b
    return out, (patches, x.shape)


def _conv_backward(layer: Conv2d, w, dz, cache):
    patches, x_shape = cache
    n, ho, wo, _ = dz.shape
    k, s = layer.kernel, layer.stride
    c = layer.in_channels
    kk = c * k * k
    wf = w.reshape(layer.out_channels, kk)
    dzf = dz.reshape(-1, layer.out_channels)
    dw = (dzf.T @ patches.reshape(-1, kk)).reshape(w.shape)
    db = dzf.sum(axis=0)
    dpatches = (dzf @ wf).reshape(n, ho, wo, c, k, k)
    dx = np.zeros(x_shape)
    for u in range(k):
        for v in range(k):
            dx[:, u : u + s * ho : s, v : v + s * wo : s, :] += dpatches[:, :, :, :, u, v]
    return dx, dw, db


def _bwd_layers(params, cursor, trace, dz, grads):
    """Reverse walk over a forward trace; cursor points one past this stack's params."""
    for layer, cache in reversed(trace):
        if isinstance(layer, Dense):
            w = params.tensors[cursor - 2]
            x2, in_shape = cache
            grads[cursor - 2] = dz.T @ x2
            grads[cursor - 1] = dz.sum(axis=0)
            dz = (dz @ w).reshape((dz.shape[0],) + in_shape)
            cursor -= 2
        elif isinstance(layer, Conv2d):
            w = params.tensors[cursor - 2]
            dz, dw, db = _conv_backward(layer, w, dz, cache)
            grads[cursor - 2] = dw
            grads[cursor - 1] = db
            cursor -= 2
        elif isinstance(layer, Relu):
            dz = dz * cache
        elif isinstance(layer, Dropout):
            if cache is not None:
                dz = dz * cache
        elif isinstance(layer, Residual):
            dz_inner, cursor = _bwd_layers(params, cursor, cache, dz, grads)
            dz = dz + dz_inner
        else:  # pragma: no cover - heads handled by the loss seed
            raise ShapeError(f"unexpected layer {layer!r} in backward walk")
    return dz, cursor


def forward_batch(
    spec: NetworkSpec,
    params: NetworkParams,
    inputs: np.ndarray,
    mode: Mode = Mode.EVAL,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Batched forward pass: (N, *input_shape) -> (N, k) probabilities."""
    if mode is not Mode.EVAL and rng is None:
        raise ValueError(f"mode {mode.value} requires an rng")
    x = np.asarray(inputs, dtype=np.float64)
    if x.shape[1:] != spec.input_shape:
        raise ShapeError(f"input shape {x.shape[1:]} does not match spec {spec.input_shape}")
    out, _ = _fwd_layers(spec.layers, params, 0, x, mode, rng, None)
    _check_finite(out, "output head")
    return out


def forward(
    spec: NetworkSpec,
    params: NetworkParams,
    input: np.ndarray,
    mode: Mode = Mode.EVAL,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Single-input forward pass returning a probability vector."""
    x = np.asarray(input, dtype=np.float64)
    if x.shape != spec.input_shape:
        raise ShapeError(f"input shape {x.shape} does not match spec {spec.input_shape}")
    return forward_batch(spec, params, x[None], mode, rng)[0]


def _stack_batch(spec: NetworkSpec, batch):
    if len(batch) == 0:
        raise DataError("empty batch")
    xs, ys = [], []
    for features, label in batch:
        f = np.asarray(features, dtype=np.float64)
        if f.size != math.prod(spec.input_shape):
            raise ShapeError(f"features of size {f.size} do not fit input shape {spec.input_shape}")
        xs.append(f.reshape(spec.input_shape))
        ys.append(label)
    y = np.asarray(ys, dtype=np.float64)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise DataError("labels must be 0 or 1")
    return np.stack(xs), y


def _loss_grad_seed(spec: NetworkSpec, probs: np.ndarray, y: np.ndarray, head_cache):
    """d(mean BCE)/d(head logits). Clamping binds only for |logit| > 27, far
    outside the regime any gradient consumer reaches, so the unclamped form
    is used.
    """
    n = probs.shape[0]
    head = spec.layers[-1]
    _, in_shape = head_cache
    if isinstance(head, SigmoidHead):
        p = probs[:, 0]
        dz = ((p - y) / n)[:, None]
    else:
        if head.k != 2:
            raise DomainError("BCE training supports softmax heads only with k=2")
        p = probs[:, 1]
        g = (p - y) / n
        dz = np.stack([-g, g], axis=1)
    return p, dz.reshape((n,) + in_shape)


def _loss_and_grads(spec, params, x, y, mode, rng):
    trace = []
    probs, cursor = _fwd_layers(spec.layers, params, 0, x, mode, rng, trace)
    _check_finite(probs, "output head")
    _, head_cache = trace.pop()
    p, dz = _loss_grad_seed(spec, probs, y, head_cache)
    loss = float(np.mean(bce_loss(p, y)))
    grads: list = [None] * len(params.tensors)
    _bwd_layers(params, cursor, trace, dz, grads)
    grad_params = NetworkParams(tuple(grads))
    for g in grad_params.tensors:
        if not np.all(np.isfinite(g)):
            raise NumericsError("non-finite gradient")
    return loss, grad_params


def backward(
    spec: NetworkSpec,
    params: NetworkParams,
    batch,
    rng: np.random.Generator | None = None,
) -> NetworkParams:
    """Gradients of the mean batch BCE w.r.t. every parameter.

    The forward pass is run internally so its dropout masks are reused
    exactly in the backward pass. Without an rng, all dropout rates must
    be zero (Eval-equivalent pass).
    """
    x, y = _stack_batch(spec, batch)
    mode = Mode.TRAIN if rng is not None else Mode.EVAL
    _, grads = _loss_and_grads(spec, params, x, y, mode, rng)
    return grads


def batch_loss(spec: NetworkSpec, params: NetworkParams, batch) -> float:
    """Mean BCE over the batch with dropout inactive."""
    x, y = _stack_batch(spec, batch)
    probs = forward_batch(spec, params, x, Mode.EVAL)
    head = spec.layers[-1]
    p = probs[:, 1] if isinstance(head, SoftmaxHead) else probs[:, 0]
    return float(np.mean(bce_loss(p, y)))


def _zero_dropout(layers) -> tuple:
    out = []
    for layer in layers:
        if isinstance(layer, Dropout):
            out.append(Dropout(0.0))
        elif isinstance(layer, Residual):
            out.append(Residual(_zero_dropout(layer.inner)))
        else:
            out.append(layer)
    return tuple(out)


def grad_check(
    spec: NetworkSpec,
    params: NetworkParams,
    batch,
    epsilon: float = 1e-5,
) -> float:
    """Max relative error between backward() and central finite differences.

    Dropout rates are forced to 0 for the check: re-masking would make the
    loss a different random function at theta+eps and theta-eps.
    """
    spec0 = NetworkSpec(_zero_dropout(spec.layers), spec.input_shape)
    analytic = backward(spec0, params, batch)
    work = params.copy()
    worst = 0.0
    for t_idx, tensor in enumerate(work.tensors):
        flat = tensor.reshape(-1)
        a_flat = analytic.tensors[t_idx].reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + epsilon
            up = batch_loss(spec0, work, batch)
            flat[i] = saved - epsilon
            down = batch_loss(spec0, work, batch)
            flat[i] = saved
            numeric = (up - down) / (2.0 * epsilon)
            denom = max(1e-8, abs(a_flat[i]) + abs(numeric))
            worst = max(worst, abs(a_flat[i] - numeric) / denom)
    return worst
