"""Forward/backward kernels for the fixed-topology layers.

All image tensors are NHWC. Every ``*_forward`` returns ``(out, cache)`` and
the matching ``*_backward`` consumes that cache.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InvalidBatchError, InvalidLabelError, InvalidShapeError

BCE_EPS = 1e-7


def _as_batch(x: np.ndarray, rank: int) -> tuple[np.ndarray, bool]:
    if x.ndim == rank - 1:
        return x[None], True
    if x.ndim != rank:
        raise InvalidShapeError(f"expected rank {rank - 1} or {rank} input, got shape {x.shape}")
    return x, False


def conv_output_size(size: int, kernel: int, stride: int) -> int:
    if size < kernel:
        raise InvalidShapeError(f"input extent {size} smaller than kernel {kernel}")
    return (size - kernel) // stride + 1


def conv2d_forward(x, kernels, bias, stride: int = 1, name: str = "conv2d"):
    """Valid-padding convolution via im2col; kernels are ``k x k x C x F``."""
    x, squeezed = _as_batch(np.asarray(x), 4)
    k, k2, c, f = kernels.shape
    if k != k2:
        raise InvalidShapeError(f"{name}: non-square kernel {kernels.shape}")
    if x.shape[3] != c:
        raise InvalidShapeError(f"{name}: input has {x.shape[3]} channels, kernels expect {c}")
    if bias.shape != (f,):
        raise InvalidShapeError(f"{name}: bias shape {bias.shape} != ({f},)")
    if stride < 1:
        raise InvalidShapeError(f"{name}: stride must be >= 1")
    n, h, w, _ = x.shape
    ho = conv_output_size(h, k, stride)
    wo = conv_output_size(w, k, stride)
    win = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::stride, ::stride][:, :ho, :wo]
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, k * k * c)
    out = cols @ kernels.reshape(k * k * c, f)
    out += bias
    out = out.reshape(n, ho, wo, f)
    cache = (x.shape, cols, kernels, stride, squeezed)
    return (out[0] if squeezed else out), cache


def conv2d_backward(grad_out, cache, need_input_grad: bool = True):
    x_shape, cols, kernels, stride, squeezed = cache
    if squeezed:
        grad_out = grad_out[None]
    n, h, w, c = x_shape
    k, _, _, f = kernels.shape
    _, ho, wo, _ = grad_out.shape
    g2 = grad_out.reshape(-1, f)
    dkernels = (cols.T @ g2).reshape(kernels.shape)
    dbias = g2.sum(axis=0)
    dx = None
    if need_input_grad:
        dcols = (g2 @ kernels.reshape(k * k * c, f).T).reshape(n, ho, wo, k, k, c)
        dx = np.zeros(x_shape, dtype=grad_out.dtype)
        span_h = stride * (ho - 1) + 1
        span_w = stride * (wo - 1) + 1
        for di in range(k):
            for dj in range(k):
                dx[:, di:di + span_h:stride, dj:dj + span_w:stride, :] += dcols[:, :, :, di, dj, :]
        if squeezed:
            dx = dx[0]
    return dx, dkernels, dbias


def maxpool_forward(x, window: int = 2, stride: int = 2):
    """Valid max-pooling; the cache stores the first argmax in each window."""
    x, squeezed = _as_batch(np.asarray(x), 4)
    n, h, w, c = x.shape
    if h < window or w < window:
        raise InvalidShapeError(f"maxpool: input {h}x{w} smaller than window {window}")
    ho = (h - window) // stride + 1
    wo = (w - window) // stride + 1
    win = sliding_window_view(x, (window, window), axis=(1, 2))[:, ::stride, ::stride][:, :ho, :wo]
    win = win.reshape(n, ho, wo, c, window * window)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    cache = (x.shape, arg, window, stride, squeezed)
    return (out[0] if squeezed else out), cache


def maxpool_backward(grad_out, cache):
    x_shape, arg, window, stride, squeezed = cache
    if squeezed:
        grad_out = grad_out[None]
    _, ho, wo, _ = grad_out.shape
    dx = np.zeros(x_shape, dtype=grad_out.dtype)
    span_h = stride * (ho - 1) + 1
    span_w = stride * (wo - 1) + 1
    for idx in range(window * window):
        di, dj = divmod(idx, window)
        dx[:, di:di + span_h:stride, dj:dj + span_w:stride, :] += np.where(arg == idx, grad_out, 0)
    return dx[0] if squeezed else dx


def dense_forward(x, weights, bias, name: str = "dense"):
    x, squeezed = _as_batch(np.asarray(x), 2)
    if x.shape[1] != weights.shape[0]:
        raise InvalidShapeError(f"{name}: input length {x.shape[1]} != weight rows {weights.shape[0]}")
    if bias.shape != (weights.shape[1],):
        raise InvalidShapeError(f"{name}: bias shape {bias.shape} != ({weights.shape[1]},)")
    out = x @ weights + bias
    return (out[0] if squeezed else out), (x, weights, squeezed)


def dense_backward(grad_out, cache):
    x, weights, squeezed = cache
    if squeezed:
        grad_out = grad_out[None]
    dx = grad_out @ weights.T
    dw = x.T @ grad_out
    db = grad_out.sum(axis=0)
    return (dx[0] if squeezed else dx), dw, db


def batchnorm_forward(x, gamma, beta, running_mean, running_var, mode: str = "train",
                      momentum: float = 0.9, eps: float = 1e-5):
    """Per-channel normalisation over every axis but the last.

    In train mode the running statistics are updated in place.
    """
    x = np.asarray(x)
    if x.shape[-1] != gamma.shape[0]:
        raise InvalidShapeError(f"batchnorm: {x.shape[-1]} channels, parameters for {gamma.shape[0]}")
    axes = tuple(range(x.ndim - 1))
    if mode == "train":
        count = int(np.prod([x.shape[a] for a in axes]))
        if count == 0:
            raise InvalidBatchError("batchnorm: empty batch in train mode")
        mean = x.mean(axis=axes)
        centered = x - mean
        var = (centered * centered).mean(axis=axes)
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    elif mode == "infer":
        centered = x - running_mean
        var = running_var
    else:
        raise ValueError(f"unknown mode {mode!r}")
    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = centered * inv_std
    out = gamma * xhat + beta
    return out, (xhat, inv_std, gamma, mode, axes)


def batchnorm_backward(grad_out, cache):
    xhat, inv_std, gamma, mode, axes = cache
    dgamma = (grad_out * xhat).sum(axis=axes)
    dbeta = grad_out.sum(axis=axes)
    dxhat = grad_out * gamma
    if mode == "infer":
        return dxhat * inv_std, dgamma, dbeta
    m = xhat.size // xhat.shape[-1]
    dx = (inv_std / m) * (m * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes))
    return dx, dgamma, dbeta


def dropout_mask(shape, rate: float, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    keep = rng.random(shape) >= rate
    return keep.astype(dtype) / dtype(1.0 - rate)


def dropout_forward(x, rate: float = 0.1, mode: str = "train", seed=None):
    """Inverted dropout. ``seed`` may be an int or a ``np.random.Generator``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    x = np.asarray(x)
    if mode == "infer" or rate == 0.0:
        return x, None
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    mask = dropout_mask(x.shape, rate, rng, x.dtype.type)
    return x * mask, mask


def dropout_backward(grad_out, mask):
    return grad_out if mask is None else grad_out * mask


def relu_forward(x):
    return np.maximum(x, 0), x > 0


def relu_backward(grad_out, mask):
    return grad_out * mask


def sigmoid(x):
    x = np.asarray(x)
    pos = x >= 0
    z = np.exp(-np.abs(x))
    return np.where(pos, 1.0 / (1.0 + z), z / (1.0 + z)).astype(x.dtype)


def sigmoid_backward(grad_out, out):
    return grad_out * out * (1 - out)


def _check_labels(label):
    y = np.asarray(label, dtype=np.float64)
    if not np.all((y == 0) | (y == 1)):
        raise InvalidLabelError(f"labels must be 0 or 1, got {np.unique(y)}")
    return y


def bce_loss(prediction, label) -> float:
    """Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7]."""
    y = _check_labels(label)
    p = np.clip(np.asarray(prediction, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def bce_backward(prediction, label) -> np.ndarray:
    """dL/dp of :func:`bce_loss`; zero where the clamp is active."""
    y = _check_labels(label)
    raw = np.asarray(prediction, dtype=np.float64)
    p = np.clip(raw, BCE_EPS, 1.0 - BCE_EPS)
    grad = (-(y / p) + (1.0 - y) / (1.0 - p)) / max(1, p.size)
    grad = np.where((raw < BCE_EPS) | (raw > 1.0 - BCE_EPS), 0.0, grad)
    if not np.ndim(raw):
        return float(grad)
    return grad.astype(raw.dtype if raw.dtype.kind == "f" else np.float32)
