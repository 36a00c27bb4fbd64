"""Forward pass: activations, heads, dropout, conv, residual, modes."""

import math

import numpy as np
import pytest

from elicitd import (
    Conv2d,
    Dense,
    Dropout,
    Mode,
    NetworkParams,
    NetworkSpec,
    Relu,
    Residual,
    ShapeError,
    SigmoidHead,
    SoftmaxHead,
    bce_loss,
    derive_stream,
    dropout_mask,
    forward,
    forward_batch,
    init_params,
    sigmoid,
    softmax,
)
from elicitd.errors import DomainError, NumericsError

from conftest import jitter_params


class TestSigmoid:
    def test_known_value(self):
        # 1 / (1 + e^-2), computed independently
        assert sigmoid(np.array([2.0]))[0] == pytest.approx(0.8807970779778823, abs=1e-15)

    def test_symmetry(self):
        z = np.linspace(-30, 30, 101)
        np.testing.assert_allclose(sigmoid(z) + sigmoid(-z), 1.0, atol=1e-12)

    def test_saturation_without_overflow(self):
        with np.errstate(over="raise"):
            out = sigmoid(np.array([-1000.0, 1000.0]))
        assert out[0] == 0.0
        assert out[1] == 1.0

    def test_midpoint(self):
        assert sigmoid(np.array([0.0]))[0] == 0.5


class TestSoftmax:
    def test_known_value(self):
        z = np.log(np.array([[1.0, 2.0, 3.0]]))
        np.testing.assert_allclose(softmax(z), [[1 / 6, 2 / 6, 3 / 6]], atol=1e-15)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        z = rng.normal(scale=50, size=(20, 4))
        np.testing.assert_allclose(softmax(z).sum(axis=1), 1.0, atol=1e-12)

    def test_shift_invariance(self):
        z = np.array([[1.0, 2.0, 3.0]])
        np.testing.assert_allclose(softmax(z), softmax(z + 500.0), atol=1e-12)

    def test_large_logits_no_overflow(self):
        with np.errstate(over="raise"):
            out = softmax(np.array([[1000.0, 0.0]]))
        np.testing.assert_allclose(out, [[1.0, 0.0]], atol=1e-12)


class TestBceLoss:
    def test_known_value(self):
        # -ln(1 - 0.9) = ln 10
        assert bce_loss(np.array([0.9]), np.array([0.0]))[0] == pytest.approx(math.log(10), rel=1e-12)

    def test_perfect_prediction_is_zero(self):
        assert bce_loss(np.array([1.0]), np.array([1.0]))[0] == pytest.approx(0.0, abs=1e-11)

    def test_wrong_saturated_prediction_is_finite(self):
        out = bce_loss(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
        assert np.all(np.isfinite(out))
        assert np.all(out > 20)  # clamp at 1e-12 puts the loss near 27.6


class TestDropoutMask:
    def test_values_are_zero_or_scale(self):
        q = 0.3
        mask = dropout_mask(10_000, q, derive_stream(1, 9))
        vals = set(np.unique(mask))
        assert vals <= {0.0, 1.0 / (1.0 - q)}

    def test_drop_fraction_close_to_rate(self):
        q = 0.3
        mask = dropout_mask(100_000, q, derive_stream(1, 9))
        assert (mask == 0).mean() == pytest.approx(q, abs=0.01)

    def test_zero_rate_identity_mask(self):
        mask = dropout_mask(50, 0.0, derive_stream(1, 9))
        np.testing.assert_array_equal(mask, np.ones(50))

    @pytest.mark.parametrize("q", [-0.1, 1.0, 1.5])
    def test_rate_out_of_range_rejected(self, q):
        with pytest.raises(DomainError):
            dropout_mask(10, q, derive_stream(1, 9))

    def test_mean_is_unbiased(self):
        # E[mask] = 1, so dropout preserves activation scale in expectation
        mask = dropout_mask(200_000, 0.4, derive_stream(1, 9))
        assert mask.mean() == pytest.approx(1.0, abs=0.01)


class TestForwardModes:
    def test_eval_is_deterministic_and_needs_no_rng(self, dense_spec, tiny_params):
        x = np.arange(4.0)
        a = forward(dense_spec, tiny_params, x)
        b = forward(dense_spec, tiny_params, x, mode=Mode.EVAL)
        np.testing.assert_array_equal(a, b)

    def test_stochastic_modes_require_rng(self, dense_spec, tiny_params):
        x = np.arange(4.0)
        for mode in (Mode.TRAIN, Mode.MC_SAMPLE):
            with pytest.raises(ValueError):
                forward(dense_spec, tiny_params, x, mode=mode)

    def test_fresh_masks_per_pass(self, dense_spec, tiny_params):
        x = np.ones(4)
        gen = derive_stream(3, 0)
        outs = {float(forward(dense_spec, tiny_params, x, Mode.MC_SAMPLE, gen)[0]) for _ in range(20)}
        assert len(outs) > 1

    def test_dropout_ignored_in_eval(self, tiny_params, dense_spec):
        no_drop = NetworkSpec(
            tuple(l for l in dense_spec.layers if not isinstance(l, Dropout)),
            dense_spec.input_shape,
        )
        x = np.arange(4.0)
        np.testing.assert_array_equal(
            forward(dense_spec, tiny_params, x),
            forward(no_drop, tiny_params, x),
        )

    def test_wrong_input_shape_rejected(self, dense_spec, tiny_params):
        with pytest.raises(ShapeError):
            forward(dense_spec, tiny_params, np.ones(5))

    def test_nonfinite_params_rejected(self, dense_spec, tiny_params):
        bad = NetworkParams(
            (np.full_like(tiny_params.tensors[0], np.inf),) + tiny_params.tensors[1:]
        )
        with pytest.raises(NumericsError):
            forward(dense_spec, bad, np.ones(4))


class TestHeads:
    def test_sigmoid_head_output_in_unit_interval(self, dense_spec, tiny_params, rng):
        out = forward_batch(dense_spec, tiny_params, rng.normal(size=(16, 4)))
        assert out.shape == (16, 1)
        assert np.all((out > 0) & (out < 1))

    def test_softmax_head_rows_sum_to_one(self, conv_spec, rng):
        params = init_params(conv_spec, derive_stream(5, 0, 0))
        out = forward_batch(conv_spec, params, rng.normal(size=(6, 4, 4, 1)))
        assert out.shape == (6, 2)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)

    def test_batch_matches_per_row_eval(self, dense_spec, tiny_params, rng):
        xs = rng.normal(size=(8, 4))
        batched = forward_batch(dense_spec, tiny_params, xs)
        rows = np.stack([forward(dense_spec, tiny_params, x) for x in xs])
        np.testing.assert_allclose(batched, rows, atol=1e-12)


def _naive_conv(x, w, b, stride):
    """Reference convolution: plain loops, valid padding, (H, W, C) layout."""
    h, wd, _ = x.shape
    out_ch, in_ch, k, _ = w.shape
    ho = (h - k) // stride + 1
    wo = (wd - k) // stride + 1
    out = np.zeros((ho, wo, out_ch))
    for i in range(ho):
        for j in range(wo):
            for o in range(out_ch):
                acc = b[o]
                for c in range(in_ch):
                    for u in range(k):
                        for v in range(k):
                            acc += w[o, c, u, v] * x[i * stride + u, j * stride + v, c]
                out[i, j, o] = acc
    return out


def _conv_flat(side, k, stride, out_ch):
    o = (side - k) // stride + 1
    return o * o * out_ch


class TestConv2d:
    @pytest.mark.parametrize("stride", [1, 2])
    def test_matches_naive_loop_oracle(self, rng, stride):
        """Full net output equals sigmoid(dense(naive_conv(x))) computed by hand."""
        flat = _conv_flat(6, 3, stride, 3)
        spec = NetworkSpec(
            (Conv2d(2, 3, 3, stride), Dense(flat, 1), SigmoidHead()),
            (6, 6, 2),
        )
        params = jitter_params(init_params(spec, derive_stream(11, 0, 0)), rng)
        wc, bc, wd, bd = params.tensors
        x = rng.normal(size=(6, 6, 2))

        got = forward(spec, params, x)[0]
        conv = _naive_conv(x, wc, bc, stride)
        z = conv.reshape(-1) @ wd.T + bd
        want = 1.0 / (1.0 + math.exp(-z[0]))
        assert got == pytest.approx(want, abs=1e-12)

    def test_channel_mismatch_rejected(self, rng):
        spec = NetworkSpec((Conv2d(1, 2, 3, 1), Dense(8, 1), SigmoidHead()), (4, 4, 1))
        params = init_params(spec, derive_stream(11, 0, 0))
        with pytest.raises(ShapeError):
            forward(spec, params, rng.normal(size=(4, 4, 2)))


class TestResidual:
    def test_zero_inner_is_identity(self):
        """A residual block with all-zero inner weights passes x through."""
        spec = NetworkSpec((Residual((Dense(3, 3), Relu())), Dense(3, 1), SigmoidHead()), (3,))
        wd = np.array([[0.5, -1.0, 2.0]])
        bd = np.array([0.25])
        params = NetworkParams((np.zeros((3, 3)), np.zeros(3), wd, bd))
        x = np.array([1.0, -2.0, 3.0])
        want = 1.0 / (1.0 + math.exp(-(x @ wd.T + bd)[0]))
        assert forward(spec, params, x)[0] == pytest.approx(want, abs=1e-14)

    def test_adds_inner_output(self, rng):
        spec = NetworkSpec((Residual((Dense(3, 3), Relu())), Dense(3, 1), SigmoidHead()), (3,))
        params = jitter_params(init_params(spec, derive_stream(2, 0, 0)), rng)
        w1, b1, w2, b2 = params.tensors
        x = rng.normal(size=3)
        h = x + np.maximum(x @ w1.T + b1, 0.0)
        want = 1.0 / (1.0 + math.exp(-(h @ w2.T + b2)[0]))
        assert forward(spec, params, x)[0] == pytest.approx(want, abs=1e-12)
