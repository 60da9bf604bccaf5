"""Float32 inference primitives for the keyword-spotting CNN family.

Tensors are plain ``numpy.float32`` arrays laid out (time, frequency,
channel). Convolutions are valid (unpadded) and run as a single matrix
multiply over an im2col patch matrix.
"""
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError

F32 = np.float32

ACTIVATIONS = ("relu", "none", "softmax")


@dataclass(frozen=True)
class ConvParams:
    weights: np.ndarray  # (m, r, c_in, n)
    bias: np.ndarray  # (n,)
    stride: tuple = (1, 1)
    pool: tuple = (1, 1)

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise ShapeError(f"conv weights must be rank 4 (m, r, c_in, n), got {self.weights.shape}")
        m, r, _, n = self.weights.shape
        if min(m, r, *self.stride, *self.pool) < 1:
            raise ShapeError(f"filter, stride and pool sizes must be >= 1: "
                             f"filter {m}x{r}, stride {self.stride}, pool {self.pool}")
        if self.bias.shape != (n,):
            raise ShapeError(f"conv bias shape {self.bias.shape} does not match n={n}")


@dataclass(frozen=True)
class DenseParams:
    weights: np.ndarray  # (in_dim, out_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str = "relu"

    def __post_init__(self):
        if self.weights.ndim != 2:
            raise ShapeError(f"dense weights must be rank 2, got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[1],):
            raise ShapeError(f"dense bias shape {self.bias.shape} does not match "
                             f"out_dim={self.weights.shape[1]}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


def conv_output_dims(t, f, m, r, s=1, v=1):
    return (t - m) // s + 1, (f - r) // v + 1


def im2col(x, m, r, s=1, v=1):
    """Unroll every m x r patch of ``x`` (T, F, C) into one row.

    Returns an array of shape (T' * F', m * r * C) whose columns are ordered
    (a, b, c) to match a (m, r, C, n) weight tensor flattened row-major.
    """
    windows = sliding_window_view(x, (m, r), axis=(0, 1))[::s, ::v]
    # windows: (T', F', C, m, r) -> (T', F', m, r, C)
    t_out, f_out = windows.shape[:2]
    return windows.transpose(0, 1, 3, 4, 2).reshape(t_out * f_out, -1)


def conv2d(x, params: ConvParams):
    x = np.asarray(x, dtype=F32)
    m, r, c_in, n = params.weights.shape
    if x.ndim != 3 or x.shape[2] != c_in or x.shape[0] < m or x.shape[1] < r:
        raise ShapeError(f"conv input {tuple(x.shape)} incompatible with weights "
                         f"{tuple(params.weights.shape)}")
    s, v = params.stride
    t_out, f_out = conv_output_dims(x.shape[0], x.shape[1], m, r, s, v)
    cols = im2col(x, m, r, s, v)
    out = cols @ params.weights.reshape(m * r * c_in, n).astype(F32, copy=False)
    out += params.bias.astype(F32, copy=False)
    return out.reshape(t_out, f_out, n)


def maxpool(x, p, q):
    x = np.asarray(x)
    t, f, c = x.shape
    if p < 1 or q < 1 or p > t or q > f:
        raise ShapeError(f"pool {p}x{q} does not fit input {tuple(x.shape)}")
    if p == 1 and q == 1:
        return x
    t_out, f_out = t // p, f // q
    trimmed = x[: t_out * p, : f_out * q]
    return trimmed.reshape(t_out, p, f_out, q, c).max(axis=(1, 3))


def relu(x):
    return np.maximum(x, 0).astype(F32, copy=False)


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    if z.size == 0:
        raise ShapeError("softmax of an empty vector")
    e = np.exp(z - z.max())
    return (e / e.sum()).astype(F32)


def dense(x, params: DenseParams):
    x = np.asarray(x, dtype=F32).reshape(-1)
    in_dim = params.weights.shape[0]
    if x.shape[0] != in_dim:
        raise ShapeError(f"dense input length {x.shape[0]} != weight in_dim {in_dim}")
    y = x @ params.weights.astype(F32, copy=False) + params.bias.astype(F32, copy=False)
    if params.activation == "relu":
        return relu(y)
    if params.activation == "softmax":
        return softmax(y)
    return y.astype(F32, copy=False)


def conv_block(x, params: ConvParams):
    """conv -> relu -> max-pool, the order every conv layer uses."""
    return maxpool(relu(conv2d(x, params)), *params.pool)


def run_layers(layers, x):
    """Apply a sequence of ConvParams / DenseParams to ``x``.

    Conv outputs are flattened in (time, frequency, channel) row-major order
    before the first dense layer. Shape errors are re-raised with the index of
    the failing layer.
    """
    h = np.asarray(x, dtype=F32)
    if h.ndim == 2:
        h = h[:, :, None]
    for i, layer in enumerate(layers):
        try:
            if isinstance(layer, ConvParams):
                h = conv_block(h, layer)
            else:
                h = dense(h.reshape(-1), layer)
        except ShapeError as exc:
            if exc.layer_index is not None:
                raise
            raise ShapeError(str(exc), layer_index=i) from None
    return h
