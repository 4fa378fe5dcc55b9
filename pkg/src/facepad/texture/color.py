"""RGB to HSV / YCbCr / gray planes, all quantised back to 8 bits."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError

PLANE_ORDER = ("H", "S", "V", "Y", "Cb", "Cr")


@dataclass
class FaceImage:
    pixels: np.ndarray  # H x W x 3, uint8
    source: str = ""

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise InvalidInputError(f"expected an HxWx3 RGB raster, got shape {px.shape}")
        if px.dtype != np.uint8:
            if px.min() < 0 or px.max() > 255:
                raise InvalidInputError("RGB samples must lie in [0, 255]")
            px = px.astype(np.uint8)
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class ColorPlanes:
    planes: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.planes[name]

    def __contains__(self, name: str) -> bool:
        return name in self.planes

    @property
    def shape(self) -> tuple[int, int]:
        return next(iter(self.planes.values())).shape


def _quantise(x: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def rgb_to_hsv(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hexcone HSV with every component scaled to [0, 255] (hue 360 deg -> 255)."""
    c = rgb.astype(np.float64) / 255.0
    r, g, b = c[..., 0], c[..., 1], c[..., 2]
    mx = c.max(axis=-1)
    mn = c.min(axis=-1)
    delta = mx - mn
    safe = np.where(delta > 0, delta, 1.0)
    hue = np.zeros_like(mx)
    is_r = (mx == r) & (delta > 0)
    is_g = (mx == g) & (delta > 0) & ~is_r
    is_b = (delta > 0) & ~is_r & ~is_g
    hue[is_r] = np.mod((g - b)[is_r] / safe[is_r], 6.0)
    hue[is_g] = (b - r)[is_g] / safe[is_g] + 2.0
    hue[is_b] = (r - g)[is_b] / safe[is_b] + 4.0
    hue *= 60.0
    sat = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0)
    return _quantise(hue * 255.0 / 360.0), _quantise(sat * 255.0), _quantise(mx * 255.0)


def rgb_to_ycbcr(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full-range BT.601 (JPEG) YCbCr."""
    c = rgb.astype(np.float64)
    r, g, b = c[..., 0], c[..., 1], c[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    return _quantise(y), _quantise(cb), _quantise(cr)


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    c = rgb.astype(np.float64)
    return _quantise(0.299 * c[..., 0] + 0.587 * c[..., 1] + 0.114 * c[..., 2])


def rgb_to_planes(image, include_gray: bool = False) -> ColorPlanes:
    """Split a FaceImage (or an HxWx3 uint8 array) into H, S, V, Y, Cb, Cr planes."""
    px = image.pixels if isinstance(image, FaceImage) else FaceImage(np.asarray(image)).pixels
    h, s, v = rgb_to_hsv(px)
    y, cb, cr = rgb_to_ycbcr(px)
    planes = {"H": h, "S": s, "V": v, "Y": y, "Cb": cb, "Cr": cr}
    if include_gray:
        planes["gray"] = rgb_to_gray(px)
    return ColorPlanes(planes)
