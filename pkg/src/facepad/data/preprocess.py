"""Face-crop preprocessing: margin-aware crop and align-corners bilinear resize.

Face detection itself is external. A detector may supply a face box; the box
is grown by ``margin / 2`` pixels per side (clipped to the raster). Without a
box the raster is taken to be an already-margined face crop and its central
square is used.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
from PIL import Image

from ..errors import InvalidInputError
from ..texture.color import FaceImage

Box = tuple[int, int, int, int]  # x0, y0, x1, y1 (exclusive)


@dataclass(frozen=True)
class PreprocessSpec:
    margin: int = 44
    side: int = 160

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.side < 16:
            raise ValueError("output side must be >= 16")


class FaceDetector(Protocol):
    def detect(self, raster: np.ndarray) -> Box | None: ...


class CenterCropDetector:
    """Fallback detector: reports no box, so the central square is used."""

    def detect(self, raster: np.ndarray) -> Box | None:
        return None


def center_square(h: int, w: int) -> Box:
    side = min(h, w)
    y0 = (h - side) // 2
    x0 = (w - side) // 2
    return (x0, y0, x0 + side, y0 + side)


def expand_box(box: Box, margin: int, h: int, w: int) -> Box:
    x0, y0, x1, y1 = box
    half = margin // 2
    return (max(x0 - half, 0), max(y0 - half, 0), min(x1 + half, w), min(y1 + half, h))


def resize_bilinear(raster: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Align-corners bilinear resize: output corners sample input corners exactly."""
    src = raster.astype(np.float64)
    h, w = src.shape[:2]
    if (h, w) == (out_h, out_w):
        return raster.copy()

    def axis(n_in, n_out):
        pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1)) if n_out > 1 else np.zeros(1)
        lo = np.clip(np.floor(pos).astype(np.int64), 0, n_in - 1)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = axis(h, out_h)
    x0, x1, fx = axis(w, out_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def preprocess(raster, spec: PreprocessSpec = PreprocessSpec(), detector: FaceDetector | None = None,
               source: str = "") -> FaceImage:
    raster = np.asarray(raster)
    if raster.ndim == 2:
        raster = np.repeat(raster[..., None], 3, axis=2)
    if raster.ndim != 3 or raster.shape[0] == 0 or raster.shape[1] == 0:
        raise InvalidInputError(f"degenerate raster of shape {raster.shape}")
    if raster.shape[2] == 4:
        raster = raster[..., :3]
    h, w = raster.shape[:2]
    box = detector.detect(raster) if detector is not None else None
    if box is None:
        box = center_square(h, w)
    else:
        box = expand_box(box, spec.margin, h, w)
    x0, y0, x1, y1 = box
    if x1 <= x0 or y1 <= y0:
        raise InvalidInputError(f"degenerate face box {box}")
    crop = raster[y0:y1, x0:x1]
    return FaceImage(resize_bilinear(crop, spec.side, spec.side), source)


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def write_image(path, pixels: np.ndarray) -> None:
    """Lossless PNG."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(pixels, dtype=np.uint8), "RGB").save(path, format="PNG")


def to_network_input(face: FaceImage | np.ndarray) -> np.ndarray:
    """Scale 8-bit RGB into [0, 1] float32."""
    px = face.pixels if isinstance(face, FaceImage) else np.asarray(face)
    return px.astype(np.float32) / np.float32(255.0)
