"""Numpy layer primitives with exact backward passes.

Data layout is (N, C, T): batch, channels, time. Convolutions slide along
the time axis with stride 1 and zero same-padding; pooling floor-divides
the length. Every forward returns (output, cache) and the matching
backward consumes (grad_output, cache).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv1d_forward(x, weight, bias):
    """Same-padded stride-1 correlation. weight: (O, C, k), bias: (O,)."""
    n, c, t = x.shape
    k = weight.shape[2]
    pad = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    win = sliding_window_view(xp, k, axis=2)  # (N, C, T, k)
    out = np.tensordot(win, weight, axes=([1, 3], [1, 2]))  # (N, T, O)
    out = np.ascontiguousarray(out.transpose(0, 2, 1)) + bias[None, :, None]
    return out, (xp, win, weight, pad, t)


def conv1d_backward(dout, cache):
    xp, win, weight, pad, t = cache
    db = dout.sum(axis=(0, 2))
    # dW[o,c,i] = sum_{n,t} dout[n,o,t] * win[n,c,t,i]
    dw = np.tensordot(dout, win, axes=([0, 2], [0, 2]))  # (O, C, k)
    dxp = np.zeros_like(xp)
    k = weight.shape[2]
    for i in range(k):
        # dxp[:, :, i:i+T] += dout^T W[:, :, i]
        dxp[:, :, i : i + t] += np.tensordot(
            dout, weight[:, :, i], axes=([1], [0])
        ).transpose(0, 2, 1)
    dx = dxp[:, :, pad : pad + t] if pad else dxp
    return dx, dw, db


def relu_forward(x):
    mask = x > 0.0
    return x * mask, mask


def relu_backward(dout, mask):
    return dout * mask


def dropout_forward(x, p, mode, rng):
    """Inverted dropout: train-mode expectation equals the eval activation."""
    if mode != "train" or p <= 0.0:
        return x, None
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask


def dropout_backward(dout, mask):
    return dout if mask is None else dout * mask


def maxpool1d_forward(x, k):
    """Non-overlapping max pooling (stride == kernel), floor semantics."""
    n, c, t = x.shape
    t_out = t // k
    xr = x[:, :, : t_out * k].reshape(n, c, t_out, k)
    arg = xr.argmax(axis=3)  # ties resolve to the first element
    out = np.take_along_axis(xr, arg[..., None], axis=3)[..., 0]
    return out, (arg, x.shape, k)


def maxpool1d_backward(dout, cache):
    arg, shape, k = cache
    n, c, t = shape
    t_out = t // k
    dxr = np.zeros((n, c, t_out, k))
    np.put_along_axis(dxr, arg[..., None], dout[..., None], axis=3)
    dx = np.zeros(shape)
    dx[:, :, : t_out * k] = dxr.reshape(n, c, t_out * k)
    return dx


def dense_forward(x, weight, bias):
    """x: (N, D_in), weight: (D_out, D_in)."""
    return x @ weight.T + bias, x


def dense_backward(dout, x, weight):
    return dout @ weight, dout.T @ x, dout.sum(axis=0)


def log_softmax(logits):
    """Row-wise log-softmax with max subtraction."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy(logits, labels):
    """Mean negative log-likelihood plus the gradient wrt logits."""
    n = logits.shape[0]
    logp = log_softmax(logits)
    value = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return value, grad
