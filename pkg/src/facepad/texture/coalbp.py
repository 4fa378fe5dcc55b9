"""Co-occurrence of adjacent LBP+ patterns (CoALBP).

LBP+ thresholds the four axis neighbours at distance R (bits: E, N, W, S),
giving 16 patterns. For each displacement ``(dx, dy)`` in
``(0, d), (d, 0), (d, d), (-d, d)`` (dx = column, dy = row) a 16x16 joint
histogram of ``(pattern[p], pattern[p + displacement])`` is accumulated.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError

PLUS_OFFSETS = ((0, 1), (-1, 0), (0, -1), (1, 0))  # (row, col): E, N, W, S
N_BINS = 4 * 256


def directions(interval: int) -> tuple[tuple[int, int], ...]:
    d = interval
    return ((0, d), (d, 0), (d, d), (-d, d))


def lbp_plus_codes(plane: np.ndarray, radius: int = 1) -> np.ndarray:
    plane = np.asarray(plane)
    h, w = plane.shape
    r = radius
    centre = plane[r:h - r, r:w - r]
    codes = np.zeros(centre.shape, dtype=np.int64)
    for n, (dy, dx) in enumerate(PLUS_OFFSETS):
        nb = plane[r + dy * r:h - r + dy * r, r + dx * r:w - r + dx * r]
        codes |= (nb >= centre).astype(np.int64) << n
    return codes


def _shifted_pairs(codes: np.ndarray, dx: int, dy: int) -> tuple[np.ndarray, np.ndarray]:
    h, w = codes.shape
    r0, r1 = max(0, -dy), h - max(0, dy)
    c0, c1 = max(0, -dx), w - max(0, dx)
    return codes[r0:r1, c0:c1], codes[r0 + dy:r1 + dy, c0 + dx:c1 + dx]


def coalbp_histogram(plane: np.ndarray, radius: int = 1, interval: int = 2) -> np.ndarray:
    """1024-bin L1-normalised co-occurrence histogram (4 directions x 16 x 16)."""
    plane = np.asarray(plane)
    min_side = 2 * radius + interval + 1
    if plane.ndim != 2 or plane.shape[0] < min_side or plane.shape[1] < min_side:
        raise InvalidInputError(f"coalbp: plane {plane.shape} smaller than {min_side}x{min_side}")
    codes = lbp_plus_codes(plane, radius)
    parts = []
    for dx, dy in directions(interval):
        a, b = _shifted_pairs(codes, dx, dy)
        parts.append(np.bincount((a * 16 + b).ravel(), minlength=256))
    hist = np.concatenate(parts).astype(np.float64)
    return hist / hist.sum()
