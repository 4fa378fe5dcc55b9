"""Finite-difference checks for every layer of a model and for the model end to end."""
from __future__ import annotations

import numpy as np

from .model.config import ModelConfig
from .model.network import DualChannelNet
from .nn import functional as F
from .nn.layers import Dropout, Layer
from .tensor import grad_check_detailed


class _LayerInput:
    """``x -> layer(x)`` with a fixed dropout mask."""

    def __init__(self, layer: Layer, seed: int = 0):
        self.layer, self.seed = layer, seed

    def forward(self, x):
        if isinstance(self.layer, Dropout):
            self.layer.reseed(self.seed)
        return self.layer.forward(x)

    def backward(self, g):
        return self.layer.backward(g)


class _LayerParam:
    """``p -> layer(x; p)`` for one named parameter and a fixed input."""

    def __init__(self, layer: Layer, key: str, x: np.ndarray):
        self.layer, self.key, self.x = layer, key, x

    def forward(self, p):
        self.layer.params[self.key][...] = p
        return self.layer.forward(self.x)

    def backward(self, g):
        self.layer.backward(g)
        return self.layer.grads[self.key]


class _ModelLoss:
    """Mean BCE of the whole model as a function of one tensor (a parameter or an input)."""

    def __init__(self, model: DualChannelNet, images, features, labels, target: str, seed: int = 0):
        self.model, self.images, self.features, self.labels = model, images, features, labels
        self.target, self.seed = target, seed
        self.params = model.params()
        self._grad = None

    def _set(self, value):
        if self.target == "images":
            self.images = value
        elif self.target == "features":
            self.features = value
        else:
            self.params[self.target][...] = value

    def forward(self, value):
        self._set(value)
        self.model.reseed_dropout(self.seed)
        z = self.model.logits(self.images, self.features)
        p = F.sigmoid(z)
        y = self.labels
        self._dz = (p - y) / y.size
        return np.array([F.bce_loss(p, y)])

    def backward(self, g):
        g = float(np.asarray(g).ravel()[0])
        deep_first = self.model.blocks.get("deep")
        if deep_first is not None:
            deep_first.layers[0].need_input_grad = self.target == "images"
        grad_in = self._backward_to_inputs(self._dz * g)
        if self.target in ("images", "features"):
            return grad_in[self.target]
        return self.model.grads()[self.target]

    def _backward_to_inputs(self, dz):
        m = self.model
        out = {}
        gh = m.blocks["head"].backward(np.asarray(dz, dtype=m.dtype)[:, None])
        if m.config.variant == "dual":
            e = m.config.embedding_size
            out["images"] = m.blocks["deep"].backward(np.ascontiguousarray(gh[:, :e]))
            out["features"] = m.blocks["wide"].backward(np.ascontiguousarray(gh[:, e:]))
        elif m.config.variant == "deep":
            out["images"] = m.blocks["deep"].backward(gh)
        else:
            out["features"] = m.blocks["wide"].backward(gh)
        return out


def _trace_inputs(model: DualChannelNet, images, features) -> dict[str, np.ndarray]:
    """Input tensor seen by every layer during one forward pass."""
    seen = {}

    def run(block, x):
        for name, layer in model.blocks[block].named_layers():
            seen[f"{block}.{name}"] = x.copy()
            x = layer.forward(x)
        return x

    e_deep = run("deep", model._check_images(images)) if model.config.uses_deep else None
    e_wide = run("wide", model._check_features(features)) if model.config.uses_wide else None
    if model.config.variant == "dual":
        z = np.concatenate([e_deep, e_wide], axis=-1)
    else:
        z = e_deep if e_deep is not None else e_wide
    run("head", z)
    return seen


def sample_batch(config: ModelConfig, batch: int = 4, seed: int = 0):
    rng = np.random.default_rng(seed)
    images = rng.uniform(0, 1, (batch,) + config.deep_input_shape)
    features = rng.standard_normal((batch, config.wide_input))
    labels = np.arange(batch, dtype=np.float64) % 2
    return images, features, labels


def _small_input_shape(layer: Layer, traced: tuple[int, ...], batch: int) -> tuple[int, ...]:
    """Shrink spatial dims to the smallest size the layer handles non-trivially."""
    if len(traced) != 3:
        return (batch,) + traced
    h, w, c = traced
    # window + 2 keeps several output positions while limiting float32 noise
    side = getattr(layer, "kernel", getattr(layer, "window", 1)) + 2
    return (batch, min(h, side), min(w, side), c)


def check_layers(config: ModelConfig | None = None, epsilon: float = 1e-3, seed: int = 0,
                 max_coords: int | None = 64, batch: int = 4,
                 dtype=np.float64) -> dict[str, float]:
    """Max relative error for every layer's input and parameters, in train mode.

    Each layer sees a random standard-normal input of its own channel/feature
    width (spatial dims shrunk), so the check exercises the layer rather than
    the conditioning of one particular activation pattern.
    """
    config = config or ModelConfig.tiny()
    model = DualChannelNet(config).astype(dtype)
    images, features, _ = sample_batch(config, 2, seed)
    shapes = {k: v.shape[1:] for k, v in _trace_inputs(model, images, features).items()}
    model.set_training(True)
    rng = np.random.default_rng(seed)
    results = {}
    for name, layer in model.layers():
        x = rng.standard_normal(_small_input_shape(layer, shapes[name], batch)).astype(dtype)
        if getattr(layer, "need_input_grad", True) is False:
            layer.need_input_grad = True
        results[f"{name}.input"] = grad_check_detailed(
            _LayerInput(layer, seed), x, epsilon, seed=seed, max_coords=max_coords,
            dtype=dtype).max_error
        for key in layer.params:
            op = _LayerParam(layer, key, x)
            results[f"{name}.{key}"] = grad_check_detailed(
                op, layer.params[key].copy(), epsilon, seed=seed, max_coords=max_coords,
                dtype=dtype).max_error
    return results


def check_model(config: ModelConfig | None = None, epsilon: float = 1e-6, seed: int = 0,
                max_coords: int | None = 32, batch: int = 4) -> dict[str, float]:
    """End-to-end loss gradient w.r.t. every parameter tensor and both inputs.

    Runs in float64: batch norm over a handful of samples makes the loss
    sharply curved in some directions, so the step has to be small, and only
    double precision resolves differences at that step.
    """
    config = config or ModelConfig.tiny()
    model = DualChannelNet(config).astype(np.float64)
    images, features, labels = sample_batch(config, batch, seed)
    model.set_training(True)
    targets = []
    if config.uses_deep:
        targets.append(("images", images))
    if config.uses_wide:
        targets.append(("features", features))
    targets += [(name, p.copy()) for name, p in model.params().items()]
    results = {}
    for name, value in targets:
        op = _ModelLoss(model, images, features, labels, name, seed)
        results[f"model:{name}"] = grad_check_detailed(
            op, value, epsilon, seed=seed, max_coords=max_coords).max_error
    return results
