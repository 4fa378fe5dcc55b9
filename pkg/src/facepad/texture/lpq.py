"""Local phase quantisation (LPQ) histograms.

For every pixel whose M x M neighbourhood fits inside the plane, the
short-term Fourier transform

    F_u(p) = sum_{(y, x)} f(p + (y, x)) * exp(-2j*pi*(u_x*x + u_y*y))

is taken at u in ((a, 0), (0, a), (a, a), (a, -a)) with offsets in
[-(M-1)/2, (M-1)/2]. The 8 real numbers [Re F_u..., Im F_u...] are
optionally decorrelated, then bit k of the code is set when component k >= 0.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InvalidInputError

N_BINS = 256
# Components this close to zero count as zero; keeps mathematically-zero
# imaginary parts from flipping on round-off for 8-bit input.
ZERO_TOL = 1e-10


def frequencies(alpha: float) -> tuple[tuple[float, float], ...]:
    return ((alpha, 0.0), (0.0, alpha), (alpha, alpha), (alpha, -alpha))


def _offsets(window: int) -> np.ndarray:
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window size must be odd and positive, got {window}")
    r = (window - 1) // 2
    return np.arange(-r, r + 1, dtype=np.float64)


@lru_cache(maxsize=16)
def whitening_matrix(window: int = 3, alpha: float = 1 / 7, rho: float = 0.9) -> np.ndarray:
    """8x8 decorrelating transform under a pixel correlation model ``rho ** distance``."""
    off = _offsets(window)
    yy, xx = np.meshgrid(off, off, indexing="ij")
    pos = np.stack([yy.ravel(), xx.ravel()], axis=1)
    basis = []
    for ux, uy in frequencies(alpha):
        basis.append(np.exp(-2j * np.pi * (ux * pos[:, 1] + uy * pos[:, 0])))
    basis = np.array(basis)
    transform = np.vstack([basis.real, basis.imag])  # 8 x M^2
    dist = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
    cov = rho ** dist
    d = transform @ cov @ transform.T
    _, _, vh = np.linalg.svd(d)
    vh.flags.writeable = False
    return vh


def lpq_components(plane: np.ndarray, window: int = 3, alpha: float = 1 / 7) -> np.ndarray:
    """STFT components, shape (8, H-M+1, W-M+1), via separable filtering."""
    plane = np.asarray(plane)
    if plane.ndim != 2 or plane.shape[0] < window or plane.shape[1] < window:
        raise InvalidInputError(f"lpq: plane {plane.shape} smaller than window {window}x{window}")
    off = _offsets(window)
    f = plane.astype(np.float64)
    w0 = np.ones(window)
    w1 = np.exp(-2j * np.pi * alpha * off)
    rows = sliding_window_view(f, window, axis=1)
    along_x0 = rows @ w0
    along_x1 = rows @ w1
    def down(a, w):
        return sliding_window_view(a, window, axis=0) @ w
    coeffs = (
        down(along_x1, w0),           # (a, 0)
        down(along_x0, w1),           # (0, a)
        down(along_x1, w1),           # (a, a)
        down(along_x1, np.conj(w1)),  # (a, -a)
    )
    return np.stack([c.real for c in coeffs] + [c.imag for c in coeffs])


def binarise(components: np.ndarray) -> np.ndarray:
    comps = np.where(np.abs(components) <= ZERO_TOL, 0.0, components)
    weights = (1 << np.arange(8, dtype=np.int64)).reshape(8, *([1] * (comps.ndim - 1)))
    return ((comps >= 0).astype(np.int64) * weights).sum(axis=0)


def lpq_codes(plane: np.ndarray, window: int = 3, alpha: float = 1 / 7,
              whiten: bool = True, rho: float = 0.9) -> np.ndarray:
    comps = lpq_components(plane, window, alpha)
    if whiten:
        comps = np.tensordot(whitening_matrix(window, alpha, rho), comps, axes=1)
    return binarise(comps)


def lpq_histogram(plane: np.ndarray, window: int = 3, alpha: float = 1 / 7,
                  whiten: bool = True, rho: float = 0.9) -> np.ndarray:
    """256-bin L1-normalised LPQ code histogram."""
    codes = lpq_codes(plane, window, alpha, whiten, rho)
    hist = np.bincount(codes.ravel(), minlength=N_BINS).astype(np.float64)
    return hist / hist.sum()
