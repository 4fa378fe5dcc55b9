"""Uniform LBP(8, R) histograms on a single 8-bit plane.

Neighbours are the 8 pixels of the square ring at distance R, visited
counter-clockwise starting east; bit n-1 is set when neighbour n >= centre.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import InvalidInputError

# (row, col) unit offsets in circular order: E, NE, N, NW, W, SW, S, SE
RING_OFFSETS = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))
N_BINS = 59


def transitions(code: int, bits: int = 8) -> int:
    """Number of circular 0/1 transitions in a ``bits``-wide code."""
    rotated = ((code >> 1) | ((code & 1) << (bits - 1))) & ((1 << bits) - 1)
    return bin(code ^ rotated).count("1")


@lru_cache(maxsize=None)
def uniform_table(bits: int = 8) -> np.ndarray:
    """Map every code to its u2 bin: uniform codes in ascending order, then one catch-all."""
    table = np.empty(1 << bits, dtype=np.int64)
    uniform = [c for c in range(1 << bits) if transitions(c, bits) <= 2]
    catch_all = len(uniform)
    table[:] = catch_all
    table[uniform] = np.arange(catch_all)
    table.flags.writeable = False
    return table


def _check_plane(plane: np.ndarray, min_side: int, what: str) -> np.ndarray:
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise InvalidInputError(f"{what}: expected a 2-D plane, got shape {plane.shape}")
    if plane.shape[0] < min_side or plane.shape[1] < min_side:
        raise InvalidInputError(f"{what}: plane {plane.shape} smaller than {min_side}x{min_side}")
    return plane


def lbp_codes(plane: np.ndarray, radius: int = 1) -> np.ndarray:
    """Raw 8-bit LBP codes for every interior pixel, shape (H-2R, W-2R)."""
    plane = _check_plane(plane, 2 * radius + 1, "lbp")
    h, w = plane.shape
    r = radius
    centre = plane[r:h - r, r:w - r]
    codes = np.zeros(centre.shape, dtype=np.int64)
    for n, (dy, dx) in enumerate(RING_OFFSETS):
        nb = plane[r + dy * r:h - r + dy * r, r + dx * r:w - r + dx * r]
        codes |= (nb >= centre).astype(np.int64) << n
    return codes


def lbp_histogram(plane: np.ndarray, radius: int = 1, neighbors: int = 8) -> np.ndarray:
    """59-bin L1-normalised uniform-LBP histogram."""
    if neighbors != 8:
        raise ValueError("only P=8 neighbours are supported")
    codes = lbp_codes(plane, radius)
    hist = np.bincount(uniform_table()[codes].ravel(), minlength=N_BINS).astype(np.float64)
    return hist / hist.sum()
