"""Declarative layer descriptions, shape inference and parameter counting."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import InvalidShapeError
from . import layers as L

KINDS = ("conv", "dense", "batchnorm", "dropout", "maxpool", "activation", "flatten", "standardize")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    name: str
    kernel: int = 0
    stride: int = 1
    padding: str = "valid"
    units: int = 0
    rate: float = 0.0
    activation: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.stride < 1:
            raise ValueError(f"{self.name}: stride must be >= 1")
        if self.padding != "valid":
            raise ValueError(f"{self.name}: only 'valid' padding is supported")
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"{self.name}: dropout rate must lie in [0, 1)")
        if self.kind in ("conv", "maxpool") and self.kernel < 1:
            raise ValueError(f"{self.name}: kernel size required")
        if self.kind in ("conv", "dense") and self.units < 1:
            raise ValueError(f"{self.name}: unit/filter count required")


@dataclass(frozen=True)
class ParamRow:
    name: str
    kind: str
    size_in: tuple[int, ...]
    size_out: tuple[int, ...]
    params: int


def _out_shape(spec: LayerSpec, shape: tuple[int, ...]) -> tuple[int, ...]:
    if spec.kind in ("conv", "maxpool"):
        if len(shape) != 3:
            raise InvalidShapeError(f"{spec.name}: expects HxWxC input, got {shape}")
        h, w, c = shape
        if h < spec.kernel or w < spec.kernel:
            raise InvalidShapeError(f"{spec.name}: input {h}x{w} smaller than kernel {spec.kernel}")
        ho = (h - spec.kernel) // spec.stride + 1
        wo = (w - spec.kernel) // spec.stride + 1
        return (ho, wo, spec.units if spec.kind == "conv" else c)
    if spec.kind == "flatten":
        return (int(np.prod(shape)),)
    if spec.kind == "dense":
        if len(shape) != 1:
            raise InvalidShapeError(f"{spec.name}: expects a flat input, got {shape}")
        return (spec.units,)
    return shape


def _count(spec: LayerSpec, shape: tuple[int, ...]) -> int:
    if spec.kind == "conv":
        return (spec.kernel * spec.kernel * shape[-1] + 1) * spec.units
    if spec.kind == "dense":
        return (shape[0] + 1) * spec.units
    if spec.kind == "batchnorm":
        # gamma, beta, running mean, running variance
        return 4 * shape[-1]
    return 0


def count_params(specs: Sequence[LayerSpec], input_shape: Sequence[int]) -> tuple[list[ParamRow], int]:
    """Per-layer parameter rows (with inferred shapes) and their total."""
    shape = tuple(int(d) for d in input_shape)
    rows = []
    for spec in specs:
        out = _out_shape(spec, shape)
        rows.append(ParamRow(spec.name, spec.kind, shape, out, _count(spec, shape)))
        shape = out
    return rows, sum(r.params for r in rows)


def build_layers(specs: Sequence[LayerSpec], input_shape: Sequence[int],
                 rng: np.random.Generator | None, dropout_seed: int = 0) -> list[L.Layer]:
    """Instantiate layers for ``specs``; conv/dense activations become separate layers."""
    shape = tuple(int(d) for d in input_shape)
    out: list[L.Layer] = []
    for spec in specs:
        if spec.kind == "conv":
            out.append(L.Conv2D(shape[-1], spec.units, spec.kernel, spec.stride, rng, spec.name))
        elif spec.kind == "dense":
            out.append(L.Dense(shape[0], spec.units, rng, spec.name))
        elif spec.kind == "batchnorm":
            out.append(L.BatchNorm(shape[-1], name=spec.name))
        elif spec.kind == "dropout":
            out.append(L.Dropout(spec.rate, dropout_seed, spec.name))
            dropout_seed += 1
        elif spec.kind == "maxpool":
            out.append(L.MaxPool2D(spec.kernel, spec.stride, spec.name))
        elif spec.kind == "flatten":
            out.append(L.Flatten(spec.name))
        elif spec.kind == "standardize":
            out.append(L.Standardize(shape[-1], spec.name))
        elif spec.kind == "activation":
            out.append(_activation(spec.activation, spec.name))
        if spec.kind in ("conv", "dense") and spec.activation:
            out.append(_activation(spec.activation, f"{spec.name}_{spec.activation}"))
        shape = _out_shape(spec, shape)
    return out


def _activation(kind: str | None, name: str) -> L.Layer:
    if kind == "relu":
        return L.ReLU(name)
    if kind == "sigmoid":
        return L.Sigmoid(name)
    raise ValueError(f"unknown activation {kind!r}")
