"""Shared fixtures and helpers for the test suite."""

import numpy as np
import pytest

from elicitd import (
    Conv2d,
    DecisionRecord,
    Dense,
    Dropout,
    NetworkParams,
    NetworkSpec,
    Relu,
    SigmoidHead,
    SoftmaxHead,
    derive_stream,
    init_params,
    residual_mlp_spec,
)


def jitter_params(params: NetworkParams, rng: np.random.Generator, scale: float = 0.1) -> NetworkParams:
    """Random offsets on every tensor, biases included.

    Keeps gradient checks away from exact ReLU kinks: zero biases can put a
    residual block's output exactly at 0 where the subgradient is ambiguous
    and finite differences straddle the kink.
    """
    return NetworkParams(tuple(t + rng.normal(scale=scale, size=t.shape) for t in params.tensors))


def random_batch(rng: np.random.Generator, n: int, shape) -> list:
    return [(rng.normal(size=shape), int(rng.integers(2))) for _ in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


@pytest.fixture
def dense_spec():
    return NetworkSpec(
        (Dense(4, 6), Relu(), Dropout(0.3), Dense(6, 5), Relu(), Dense(5, 1), SigmoidHead()),
        (4,),
    )


@pytest.fixture
def residual_spec():
    return residual_mlp_spec(4, width=5, blocks=1, dropout_rate=0.2)


@pytest.fixture
def conv_spec():
    return NetworkSpec(
        (Conv2d(1, 2, 3, 1), Relu(), Dense(2 * 2 * 2, 2), SoftmaxHead(2)),
        (4, 4, 1),
    )


@pytest.fixture
def tiny_params(dense_spec):
    return init_params(dense_spec, derive_stream(7, 0, 0))


def make_records(rng: np.random.Generator, n: int, n_features: int = 4, agreement: bool = False):
    """Linearly separable toy records: label from the sign of the first feature."""
    out = []
    for i in range(n):
        x = rng.normal(size=n_features)
        y = int(x[0] > 0)
        a = int(rng.integers(4, 8)) if agreement else None
        out.append(DecisionRecord(f"r{i:04d}", x, y, a))
    return out
