"""Stateful layer objects wrapping the functional kernels.

A layer owns its trainable ``params``, non-trainable ``buffers`` and the
``grads`` written by the last ``backward``. ``training`` selects train/infer
behaviour for batchnorm and dropout.
"""
from __future__ import annotations

import numpy as np

from . import functional as F

DTYPE = np.float32


class Layer:
    name = "layer"

    def __init__(self, name: str | None = None):
        if name is not None:
            self.name = name
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.training = False
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def output_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        return in_shape

    def astype(self, dtype) -> "Layer":
        """Cast parameters and buffers in place (float64 for gradient checks)."""
        for store in (self.params, self.buffers):
            for k, v in store.items():
                store[k] = v.astype(dtype)
        return self

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


def he_uniform(shape, fan_in: int, rng: np.random.Generator | None) -> np.ndarray:
    """He-uniform draw; ``rng=None`` gives an all-zero tensor."""
    if rng is None:
        return np.zeros(shape, dtype=DTYPE)
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(DTYPE)


class Conv2D(Layer):
    def __init__(self, in_channels: int, filters: int, kernel: int, stride: int = 1,
                 rng: np.random.Generator | None = None, name: str = "conv"):
        super().__init__(name)
        self.kernel, self.stride = kernel, stride
        self.params["kernel"] = he_uniform((kernel, kernel, in_channels, filters),
                                           kernel * kernel * in_channels, rng)
        self.params["bias"] = np.zeros(filters, dtype=DTYPE)
        self.need_input_grad = True

    def forward(self, x):
        out, self._cache = F.conv2d_forward(x, self.params["kernel"], self.params["bias"],
                                            self.stride, self.name)
        return out

    def backward(self, grad_out):
        dx, dk, db = F.conv2d_backward(grad_out, self._cache, self.need_input_grad)
        self.grads["kernel"], self.grads["bias"] = dk, db
        return dx

    def output_shape(self, in_shape):
        h, w, _ = in_shape
        f = self.params["kernel"].shape[3]
        return (F.conv_output_size(h, self.kernel, self.stride),
                F.conv_output_size(w, self.kernel, self.stride), f)


class MaxPool2D(Layer):
    def __init__(self, window: int = 2, stride: int = 2, name: str = "maxpool"):
        super().__init__(name)
        self.window, self.stride = window, stride

    def forward(self, x):
        out, self._cache = F.maxpool_forward(x, self.window, self.stride)
        return out

    def backward(self, grad_out):
        return F.maxpool_backward(grad_out, self._cache)

    def output_shape(self, in_shape):
        h, w, c = in_shape
        return ((h - self.window) // self.stride + 1, (w - self.window) // self.stride + 1, c)


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator | None = None,
                 name: str = "dense"):
        super().__init__(name)
        self.params["weight"] = he_uniform((n_in, n_out), n_in, rng)
        self.params["bias"] = np.zeros(n_out, dtype=DTYPE)

    def forward(self, x):
        out, self._cache = F.dense_forward(x, self.params["weight"], self.params["bias"], self.name)
        return out

    def backward(self, grad_out):
        dx, dw, db = F.dense_backward(grad_out, self._cache)
        self.grads["weight"], self.grads["bias"] = dw, db
        return dx

    def output_shape(self, in_shape):
        return (self.params["weight"].shape[1],)


class BatchNorm(Layer):
    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5,
                 name: str = "batchnorm"):
        super().__init__(name)
        self.momentum, self.eps = momentum, eps
        self.params["gamma"] = np.ones(channels, dtype=DTYPE)
        self.params["beta"] = np.zeros(channels, dtype=DTYPE)
        self.buffers["running_mean"] = np.zeros(channels, dtype=DTYPE)
        self.buffers["running_var"] = np.ones(channels, dtype=DTYPE)

    def forward(self, x):
        out, self._cache = F.batchnorm_forward(
            x, self.params["gamma"], self.params["beta"],
            self.buffers["running_mean"], self.buffers["running_var"],
            "train" if self.training else "infer", self.momentum, self.eps)
        return out

    def backward(self, grad_out):
        dx, dg, db = F.batchnorm_backward(grad_out, self._cache)
        self.grads["gamma"], self.grads["beta"] = dg, db
        return dx


class Standardize(Layer):
    """Fixed affine input scaling ``(x - mean) * scale``; buffers, not trained."""

    def __init__(self, features: int, name: str = "standardize"):
        super().__init__(name)
        self.buffers["mean"] = np.zeros(features, dtype=DTYPE)
        self.buffers["scale"] = np.ones(features, dtype=DTYPE)

    def fit(self, x: np.ndarray, floor: float = 1e-6) -> None:
        x = np.asarray(x, dtype=np.float64)
        self.buffers["mean"][...] = x.mean(axis=0)
        self.buffers["scale"][...] = 1.0 / np.maximum(x.std(axis=0), floor)

    def forward(self, x):
        return (x - self.buffers["mean"]) * self.buffers["scale"]

    def backward(self, grad_out):
        return grad_out * self.buffers["scale"]


class Dropout(Layer):
    def __init__(self, rate: float = 0.1, seed: int = 0, name: str = "dropout"):
        super().__init__(name)
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self.rng = np.random.default_rng(seed)

    def reseed(self, seed) -> None:
        self.rng = np.random.default_rng(seed)

    def forward(self, x):
        out, self._cache = F.dropout_forward(x, self.rate, "train" if self.training else "infer",
                                             self.rng)
        return out

    def backward(self, grad_out):
        return F.dropout_backward(grad_out, self._cache)


class ReLU(Layer):
    name = "relu"

    def forward(self, x):
        out, self._cache = F.relu_forward(x)
        return out

    def backward(self, grad_out):
        return F.relu_backward(grad_out, self._cache)


class Sigmoid(Layer):
    name = "sigmoid"

    def forward(self, x):
        self._cache = F.sigmoid(x)
        return self._cache

    def backward(self, grad_out):
        return F.sigmoid_backward(grad_out, self._cache)


class Flatten(Layer):
    name = "flatten"

    def forward(self, x):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._cache)

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)


class Sequential(Layer):
    """Runs layers in order; ``backward`` walks them in reverse."""

    def __init__(self, layers: list[Layer], name: str = "sequential"):
        super().__init__(name)
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad_out):
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
            if grad_out is None:
                break
        return grad_out

    def trace(self, x) -> list[tuple[str, tuple[int, ...], tuple[int, ...]]]:
        """Forward ``x`` and record ``(layer, shape_in, shape_out)`` per layer."""
        rows = []
        for layer in self.layers:
            y = layer.forward(x)
            rows.append((layer.name, tuple(x.shape[1:]), tuple(y.shape[1:])))
            x = y
        return rows

    def astype(self, dtype) -> "Sequential":
        for layer in self.layers:
            layer.astype(dtype)
        return self

    def set_training(self, flag: bool) -> None:
        self.training = flag
        for layer in self.layers:
            layer.training = flag
            if isinstance(layer, Sequential):
                layer.set_training(flag)

    def named_layers(self):
        for layer in self.layers:
            if isinstance(layer, Sequential):
                for name, sub in layer.named_layers():
                    yield f"{layer.name}.{name}", sub
            else:
                yield layer.name, layer
