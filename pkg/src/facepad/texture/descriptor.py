"""Concatenated color-texture descriptor vector for the wide channel.

Layout: for each descriptor in (LBP, CoALBP, LPQ), for each plane in
(H, S, V, Y, Cb, Cr[, gray]), one L1-normalised histogram slice.
With six planes that is 354 + 6144 + 1536 = 8034 values.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InvalidInputError
from .coalbp import N_BINS as COALBP_BINS
from .coalbp import coalbp_histogram
from .color import PLANE_ORDER, ColorPlanes, rgb_to_planes
from .lbp import N_BINS as LBP_BINS
from .lbp import lbp_histogram
from .lpq import N_BINS as LPQ_BINS
from .lpq import lpq_histogram

DESCRIPTORS = ("LBP", "CoALBP", "LPQ")
SLICE_LENGTHS = {"LBP": LBP_BINS, "CoALBP": COALBP_BINS, "LPQ": LPQ_BINS}


@dataclass(frozen=True)
class DescriptorSettings:
    lbp_radius: int = 1
    lbp_neighbors: int = 8
    coalbp_radius: int = 1
    coalbp_interval: int = 2
    lpq_window: int = 3
    lpq_alpha: float = 1 / 7
    lpq_whiten: bool = True
    lpq_rho: float = 0.9
    include_gray: bool = False

    @property
    def planes(self) -> tuple[str, ...]:
        return PLANE_ORDER + (("gray",) if self.include_gray else ())

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LayoutEntry:
    descriptor: str
    plane: str
    offset: int
    length: int


@dataclass
class DescriptorVector:
    values: np.ndarray
    layout: list[LayoutEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.values.size)

    def slice(self, descriptor: str, plane: str) -> np.ndarray:
        for e in self.layout:
            if e.descriptor == descriptor and e.plane == plane:
                return self.values[e.offset:e.offset + e.length]
        raise KeyError((descriptor, plane))

    def total(self, descriptor: str) -> int:
        return sum(e.length for e in self.layout if e.descriptor == descriptor)


def descriptor_layout(settings: DescriptorSettings = DescriptorSettings()) -> list[LayoutEntry]:
    layout, offset = [], 0
    for name in DESCRIPTORS:
        for plane in settings.planes:
            n = SLICE_LENGTHS[name]
            layout.append(LayoutEntry(name, plane, offset, n))
            offset += n
    return layout


def vector_length(settings: DescriptorSettings = DescriptorSettings()) -> int:
    return sum(e.length for e in descriptor_layout(settings))


def _histogram(name: str, plane: np.ndarray, s: DescriptorSettings) -> np.ndarray:
    if name == "LBP":
        return lbp_histogram(plane, s.lbp_radius, s.lbp_neighbors)
    if name == "CoALBP":
        return coalbp_histogram(plane, s.coalbp_radius, s.coalbp_interval)
    return lpq_histogram(plane, s.lpq_window, s.lpq_alpha, s.lpq_whiten, s.lpq_rho)


def extract_descriptor_vector(planes: ColorPlanes,
                              settings: DescriptorSettings = DescriptorSettings()) -> DescriptorVector:
    missing = [p for p in settings.planes if p not in planes]
    if missing:
        raise InvalidInputError(f"missing color planes: {', '.join(missing)}")
    layout = descriptor_layout(settings)
    values = np.empty(layout[-1].offset + layout[-1].length, dtype=np.float32)
    for e in layout:
        values[e.offset:e.offset + e.length] = _histogram(e.descriptor, planes[e.plane], settings)
    return DescriptorVector(values, layout)


def describe_image(rgb, settings: DescriptorSettings = DescriptorSettings()) -> DescriptorVector:
    """RGB raster straight to its descriptor vector."""
    return extract_descriptor_vector(rgb_to_planes(rgb, settings.include_gray), settings)
