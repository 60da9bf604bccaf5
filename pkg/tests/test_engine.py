import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kwsbench import engine
from kwsbench.engine import ConvParams, DenseParams, conv2d, dense, maxpool, relu, softmax
from kwsbench.errors import ShapeError

from oracles import naive_conv, naive_dense, naive_maxpool


def conv_params(rng, m, r, c, n, stride=(1, 1), pool=(1, 1), bias=True):
    w = rng.standard_normal((m, r, c, n)).astype(np.float32)
    b = rng.standard_normal(n).astype(np.float32) if bias else np.zeros(n, np.float32)
    return ConvParams(w, b, stride, pool)


def test_trad_fpool3_conv1_geometry(rng):
    x = rng.standard_normal((101, 40, 1)).astype(np.float32)
    out = conv2d(x, conv_params(rng, 20, 8, 1, 64))
    assert out.shape == (82, 33, 64)
    assert out.dtype == np.float32


def test_identity_kernel(rng):
    x = rng.standard_normal((7, 5, 1)).astype(np.float32)
    p = ConvParams(np.ones((1, 1, 1, 1), np.float32), np.zeros(1, np.float32))
    np.testing.assert_array_equal(conv2d(x, p), x)


def test_conv_matches_naive_9x9x2(rng):
    x = rng.standard_normal((9, 9, 2)).astype(np.float32)
    p = conv_params(rng, 3, 3, 2, 4)
    expected = naive_conv(x, p.weights, p.bias)
    np.testing.assert_allclose(conv2d(x, p), expected, atol=1e-5)


@settings(max_examples=60, deadline=None)
@given(t=st.integers(1, 12), f=st.integers(1, 10), c=st.integers(1, 3),
       m=st.integers(1, 5), r=st.integers(1, 5), n=st.integers(1, 4),
       s=st.integers(1, 3), v=st.integers(1, 3), seed=st.integers(0, 2**32 - 1))
def test_conv_shape_algebra_and_oracle(t, f, c, m, r, n, s, v, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((t, f, c)).astype(np.float32)
    p = conv_params(rng, m, r, c, n, (s, v))
    if m > t or r > f:
        with pytest.raises(ShapeError):
            conv2d(x, p)
        return
    out = conv2d(x, p)
    assert out.shape == ((t - m) // s + 1, (f - r) // v + 1, n)
    np.testing.assert_allclose(out, naive_conv(x, p.weights, p.bias, (s, v)), atol=1e-5)


@pytest.mark.parametrize("alpha", [-2.0, 0.5, 3.0])
def test_conv_linearity_without_bias(rng, alpha):
    x = rng.standard_normal((10, 8, 2)).astype(np.float32)
    p = conv_params(rng, 3, 2, 2, 5, bias=False)
    base = conv2d(x, p)
    scaled = conv2d((alpha * x).astype(np.float32), p)
    np.testing.assert_allclose(scaled, alpha * base, rtol=1e-5, atol=1e-5 * np.abs(base).max())


def test_conv_shape_error_mentions_both_shapes(rng):
    x = np.zeros((5, 5, 2), np.float32)
    with pytest.raises(ShapeError, match=r"\(5, 5, 2\).*\(3, 3, 1, 4\)"):
        conv2d(x, conv_params(rng, 3, 3, 1, 4))


def test_conv_params_validation():
    with pytest.raises(ShapeError):
        ConvParams(np.zeros((2, 2, 1, 3), np.float32), np.zeros(2, np.float32))
    with pytest.raises(ShapeError):
        ConvParams(np.zeros((2, 2, 1, 3), np.float32), np.zeros(3, np.float32), stride=(0, 1))


def test_maxpool_identity(rng):
    x = rng.standard_normal((4, 6, 3)).astype(np.float32)
    np.testing.assert_array_equal(maxpool(x, 1, 1), x)


def test_maxpool_4x4():
    x = np.arange(1, 17, dtype=np.float32).reshape(4, 4, 1)
    np.testing.assert_array_equal(maxpool(x, 2, 2)[:, :, 0], [[6, 8], [14, 16]])


def test_maxpool_trad_fpool3_shape():
    assert maxpool(np.zeros((82, 33, 64), np.float32), 1, 3).shape == (82, 11, 64)


def test_maxpool_drops_remainder_and_matches_oracle(rng):
    x = rng.standard_normal((81, 33, 2)).astype(np.float32)
    out = maxpool(x, 2, 3)
    assert out.shape == (40, 11, 2)
    np.testing.assert_array_equal(out, naive_maxpool(x, 2, 3))


def test_maxpool_too_large():
    with pytest.raises(ShapeError):
        maxpool(np.zeros((3, 3, 1), np.float32), 4, 1)


def test_relu_values_and_idempotence(rng):
    assert relu(np.float32(-1.0)) == 0
    assert relu(np.float32(3.5)) == np.float32(3.5)
    x = rng.standard_normal(100).astype(np.float32)
    np.testing.assert_array_equal(relu(relu(x)), relu(x))


def test_softmax_uniform_and_stable():
    np.testing.assert_allclose(softmax([0, 0, 0, 0]), [0.25] * 4)
    out = softmax([1000.0, 0.0])
    assert np.isfinite(out).all()
    np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-12)


def test_softmax_random_normalized(rng):
    for _ in range(50):
        z = rng.standard_normal(12) * 10
        p = softmax(z)
        assert abs(float(p.sum()) - 1.0) <= 1e-6
        assert np.argmax(p) == np.argmax(z)
        assert (p > 0).all() and (p <= 1).all()


def test_dense_identity_and_bias():
    x = np.arange(5, dtype=np.float32)
    eye = DenseParams(np.eye(5, dtype=np.float32), np.zeros(5, np.float32), "none")
    np.testing.assert_array_equal(dense(x, eye), x)
    b = np.array([-1.0, 2.0, 0.5], np.float32)
    zero = DenseParams(np.zeros((5, 3), np.float32), b, "relu")
    np.testing.assert_array_equal(dense(x, zero), relu(b))


def test_dense_lin_sized_against_oracle(rng):
    # 73x8x64 flattened into the 32-wide lin layer
    x = rng.standard_normal(37376).astype(np.float32)
    w = rng.uniform(-0.05, 0.05, (37376, 32)).astype(np.float32)
    b = rng.standard_normal(32).astype(np.float32)
    got = dense(x, DenseParams(w, b, "none"))
    expected = (x.astype(np.float64)[:, None] * w.astype(np.float64)).sum(axis=0) + b
    assert np.abs(got - expected).max() <= 1e-4 * np.abs(expected).max()


def test_dense_small_against_scalar_oracle(rng):
    x = rng.standard_normal(17).astype(np.float32)
    w = rng.standard_normal((17, 6)).astype(np.float32)
    b = rng.standard_normal(6).astype(np.float32)
    np.testing.assert_allclose(dense(x, DenseParams(w, b, "none")), naive_dense(x, w, b),
                               rtol=1e-5, atol=1e-5)


def test_dense_length_mismatch():
    p = DenseParams(np.zeros((4, 2), np.float32), np.zeros(2, np.float32))
    with pytest.raises(ShapeError):
        dense(np.zeros(5, np.float32), p)


def test_run_layers_reports_failing_layer(rng):
    layers = [conv_params(rng, 2, 2, 1, 3), DenseParams(np.zeros((99, 2), np.float32),
                                                        np.zeros(2, np.float32))]
    with pytest.raises(ShapeError) as info:
        engine.run_layers(layers, np.zeros((4, 4), np.float32))
    assert info.value.layer_index == 1
