"""Model configuration and the layer lists it expands to."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..nn.layerspec import LayerSpec, ParamRow, count_params
from ..texture.descriptor import vector_length

VARIANTS = ("dual", "deep", "wide")


@dataclass(frozen=True)
class ModelConfig:
    input_size: int = 160
    conv_filters: tuple[int, ...] = (32, 32, 64, 64, 128, 128)
    conv_kernels: tuple[int, ...] = (3, 3, 3, 3, 5, 5)
    embedding_size: int = 512
    wide_input: int = vector_length()
    wide_hidden: tuple[int, ...] = (512, 512)
    wide_batchnorm: bool = False
    wide_standardize: bool = True
    dropout: float = 0.1
    fusion_hidden: tuple[int, ...] = (512, 256)
    variant: str = "dual"
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if len(self.conv_filters) != 6 or len(self.conv_kernels) != 6:
            raise ValueError("the deep channel has exactly six convolutions")
        if len(self.fusion_hidden) != 2 or len(self.wide_hidden) != 2:
            raise ValueError("wide and fusion blocks have exactly two hidden layers")
        for name in ("conv_filters", "conv_kernels", "wide_hidden", "fusion_hidden"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        # raises InvalidShapeError if the conv/pool chain does not fit the input
        count_params(self.deep_specs(), self.deep_input_shape)

    @classmethod
    def tiny(cls, **overrides) -> "ModelConfig":
        """Widths divided by 8 at the smallest input the deep-channel kernels admit."""
        base = dict(input_size=52, conv_filters=(4, 4, 8, 8, 16, 16), embedding_size=64,
                    wide_hidden=(64, 64), fusion_hidden=(64, 32))
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    @property
    def deep_input_shape(self) -> tuple[int, int, int]:
        return (self.input_size, self.input_size, 3)

    @property
    def uses_deep(self) -> bool:
        return self.variant in ("dual", "deep")

    @property
    def uses_wide(self) -> bool:
        return self.variant in ("dual", "wide")

    def deep_specs(self) -> list[LayerSpec]:
        f, k, e = self.conv_filters, self.conv_kernels, self.embedding_size
        specs = []
        for stage in range(3):
            a, b = 2 * stage, 2 * stage + 1
            specs += [
                LayerSpec("conv", f"conv{a + 1}", kernel=k[a], units=f[a], activation="relu"),
                LayerSpec("conv", f"conv{b + 1}", kernel=k[b], units=f[b], activation="relu"),
                LayerSpec("batchnorm", f"bn{stage + 1}"),
                LayerSpec("dropout", f"dropout{stage + 1}", rate=self.dropout),
                LayerSpec("maxpool", f"pool{stage + 1}", kernel=2, stride=2),
            ]
        specs += [
            LayerSpec("flatten", "flatten"),
            LayerSpec("dense", "dense1", units=e, activation="relu"),
            LayerSpec("batchnorm", "bn4"),
            LayerSpec("dense", "embedding", units=e, activation="relu"),
        ]
        return specs

    def wide_specs(self) -> list[LayerSpec]:
        h1, h2 = self.wide_hidden
        specs = [LayerSpec("standardize", "standardize")] if self.wide_standardize else []
        specs.append(LayerSpec("dense", "dense1", units=h1, activation="relu"))
        if self.wide_batchnorm:
            specs.append(LayerSpec("batchnorm", "bn1"))
        specs.append(LayerSpec("dense", "dense2", units=h2, activation="relu"))
        return specs

    def head_specs(self) -> list[LayerSpec]:
        """Fusion block for the dual model; a lone sigmoid unit for ablations."""
        if self.variant != "dual":
            return [LayerSpec("dense", "classify", units=1)]
        h1, h2 = self.fusion_hidden
        return [
            LayerSpec("dense", "dense3", units=h1, activation="relu"),
            LayerSpec("batchnorm", "bn"),
            LayerSpec("dense", "dense4", units=h2, activation="relu"),
            LayerSpec("dense", "classify", units=1),
        ]

    @property
    def head_input(self) -> int:
        if self.variant == "dual":
            return self.embedding_size + self.wide_hidden[1]
        return self.embedding_size if self.variant == "deep" else self.wide_hidden[1]

    def param_table(self) -> dict[str, tuple[list[ParamRow], int]]:
        """Per-block ``(rows, total)`` parameter accounting."""
        table = {}
        if self.uses_deep:
            table["deep"] = count_params(self.deep_specs(), self.deep_input_shape)
        if self.uses_wide:
            table["wide"] = count_params(self.wide_specs(), (self.wide_input,))
        table["head"] = count_params(self.head_specs(), (self.head_input,))
        return table

    def total_params(self) -> int:
        return sum(total for _, total in self.param_table().values())
