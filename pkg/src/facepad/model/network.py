"""The dual-channel network and its single-channel ablations."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidShapeError
from ..nn import functional as F
from ..nn.layers import Dropout, Layer, Sequential, Standardize
from ..nn.layerspec import build_layers
from .config import ModelConfig

_BLOCK_STREAMS = {"deep": 1, "wide": 2, "head": 3}


def _block_rng(seed: int, block: str, init: bool):
    # one stream per block so ablations share the dual model's channel weights
    return np.random.default_rng([seed, _BLOCK_STREAMS[block]]) if init else None


class DualChannelNet:
    """Deep (CNN) and wide (descriptor MLP) channels joined by a fusion head.

    ``variant="deep"`` or ``"wide"`` drops the other channel and replaces the
    fusion block with a single sigmoid unit.
    """

    def __init__(self, config: ModelConfig = ModelConfig(), init: bool = True):
        self.config = config
        self.blocks: dict[str, Sequential] = {}
        if config.uses_deep:
            layers = build_layers(config.deep_specs(), config.deep_input_shape,
                                  _block_rng(config.seed, "deep", init))
            layers[0].need_input_grad = False
            self.blocks["deep"] = Sequential(layers, "deep")
        if config.uses_wide:
            self.blocks["wide"] = Sequential(
                build_layers(config.wide_specs(), (config.wide_input,),
                             _block_rng(config.seed, "wide", init)), "wide")
        self.blocks["head"] = Sequential(
            build_layers(config.head_specs(), (config.head_input,),
                         _block_rng(config.seed, "head", init)), "head")
        self.dtype = np.dtype(np.float32)
        self.reseed_dropout(config.seed)
        self.set_training(False)

    # -- parameter access -------------------------------------------------
    def layers(self):
        for block, seq in self.blocks.items():
            for name, layer in seq.named_layers():
                yield f"{block}.{name}", layer

    def params(self) -> dict[str, np.ndarray]:
        return {f"{n}.{k}": v for n, layer in self.layers() for k, v in layer.params.items()}

    def buffers(self) -> dict[str, np.ndarray]:
        return {f"{n}.{k}": v for n, layer in self.layers() for k, v in layer.buffers.items()}

    def state(self) -> dict[str, np.ndarray]:
        """Every stored tensor (trainable and running statistics) in a fixed order."""
        out = {}
        for n, layer in self.layers():
            for k, v in layer.params.items():
                out[f"{n}.{k}"] = v
            for k, v in layer.buffers.items():
                out[f"{n}.{k}"] = v
        return out

    def grads(self) -> dict[str, np.ndarray]:
        return {f"{n}.{k}": v for n, layer in self.layers() for k, v in layer.grads.items()}

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        state = self.state()
        for name, target in state.items():
            src = tensors[name]
            if src.shape != target.shape:
                raise InvalidShapeError(f"{name}: stored shape {src.shape} != model shape {target.shape}")
            target[...] = src

    def astype(self, dtype) -> "DualChannelNet":
        """Cast every tensor; float64 is used by the gradient checks."""
        self.dtype = np.dtype(dtype)
        for seq in self.blocks.values():
            seq.astype(dtype)
        return self

    def set_training(self, flag: bool) -> None:
        self.training = flag
        for seq in self.blocks.values():
            seq.set_training(flag)

    def reseed_dropout(self, seed) -> None:
        seq = np.random.SeedSequence(seed)
        drops = [layer for _, layer in self.layers() if isinstance(layer, Dropout)]
        for layer, child in zip(drops, seq.spawn(len(drops))):
            layer.rng = np.random.default_rng(child)

    def fit_standardizer(self, features) -> None:
        """Set the wide-channel input scaling from training descriptors."""
        if not self.config.uses_wide:
            return
        for _, layer in self.blocks["wide"].named_layers():
            if isinstance(layer, Standardize):
                layer.fit(self._check_features(features))

    # -- forward ------------------------------------------------------------
    def _check_images(self, images):
        images = np.asarray(images, dtype=self.dtype)
        if images.ndim == 3:
            images = images[None]
        if images.ndim != 4 or images.shape[1:] != self.config.deep_input_shape:
            raise InvalidShapeError(
                f"deep channel expects N x {self.config.input_size} x {self.config.input_size} x 3, "
                f"got {images.shape}")
        return images

    def _check_features(self, features):
        features = np.asarray(features, dtype=self.dtype)
        if features.ndim == 1:
            features = features[None]
        if features.ndim != 2 or features.shape[1] != self.config.wide_input:
            raise InvalidShapeError(
                f"wide channel expects vectors of length {self.config.wide_input}, got {features.shape}")
        return features

    def deep_forward(self, images) -> np.ndarray:
        return self.blocks["deep"].forward(self._check_images(images))

    def wide_forward(self, features) -> np.ndarray:
        return self.blocks["wide"].forward(self._check_features(features))

    def head_logits(self, e_deep=None, e_wide=None) -> np.ndarray:
        if self.config.variant == "dual":
            if e_deep.shape != e_wide.shape or e_deep.shape[-1] != self.config.embedding_size:
                raise InvalidShapeError(f"embedding shapes {e_deep.shape} and {e_wide.shape} do not fuse")
            z = np.concatenate([e_deep, e_wide], axis=-1)
        else:
            z = e_deep if self.config.variant == "deep" else e_wide
        return self.blocks["head"].forward(z)[..., 0]

    def logits(self, images=None, features=None) -> np.ndarray:
        e_deep = self.deep_forward(images) if self.config.uses_deep else None
        e_wide = self.wide_forward(features) if self.config.uses_wide else None
        return self.head_logits(e_deep, e_wide)

    def forward(self, images=None, features=None) -> np.ndarray:
        """Spoof probability per sample."""
        return F.sigmoid(self.logits(images, features))

    def fuse_and_classify(self, e_deep, e_wide) -> np.ndarray:
        return F.sigmoid(self.head_logits(e_deep, e_wide))

    # -- backward -------------------------------------------------------------
    def backward(self, grad_logits: np.ndarray) -> None:
        """Backpropagate dL/dlogit; layer ``grads`` are filled in."""
        g = self.blocks["head"].backward(np.asarray(grad_logits, dtype=self.dtype)[:, None])
        if self.config.variant == "dual":
            e = self.config.embedding_size
            self.blocks["deep"].backward(np.ascontiguousarray(g[:, :e]))
            self.blocks["wide"].backward(np.ascontiguousarray(g[:, e:]))
        elif self.config.variant == "deep":
            self.blocks["deep"].backward(g)
        else:
            self.blocks["wide"].backward(g)

    def loss_and_grad(self, images, features, labels) -> tuple[float, np.ndarray]:
        """Mean BCE over the batch; gradients land in the layers."""
        z = self.logits(images, features)
        p = F.sigmoid(z)
        y = np.asarray(labels, dtype=self.dtype)
        loss = F.bce_loss(p, y)
        # exact gradient of BCE(sigmoid(z)) w.r.t. z
        self.backward((p - y) / y.size)
        return loss, p


def single_channel_variant(channel: str, config: ModelConfig = ModelConfig()) -> DualChannelNet:
    """Ablation model: one channel feeding a single sigmoid unit."""
    if channel not in ("deep", "wide"):
        raise ValueError(f"channel must be 'deep' or 'wide', got {channel!r}")
    return DualChannelNet(config.replace(variant=channel))


def layer_of(model: DualChannelNet, qualified: str) -> Layer:
    for name, layer in model.layers():
        if name == qualified:
            return layer
    raise KeyError(qualified)
