"""Tensor substrate: float32 numpy arrays plus a finite-difference checker.

A tensor is a C-contiguous ``np.ndarray`` of dtype float32. Layers expose a
``forward``/``backward`` pair; :func:`grad_check` compares that backward
against central differences of a random linear projection of the output.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import InvalidShapeError, NumericFailureError

DTYPE = np.float32


class Differentiable(Protocol):
    def forward(self, x: np.ndarray) -> np.ndarray: ...

    def backward(self, grad_out: np.ndarray) -> np.ndarray: ...


def _check_shape(shape: Sequence[int]) -> tuple[int, ...]:
    shape = tuple(int(d) for d in shape)
    if not shape or any(d < 1 for d in shape):
        raise InvalidShapeError(f"every dimension must be >= 1, got {shape}")
    return shape


def tensor_create(shape: Sequence[int], fill: float | str = 0.0, seed: int | None = None) -> np.ndarray:
    """Create a float32 tensor filled with a constant, or ``"random"`` values.

    Random fills draw from a standard normal with ``np.random.default_rng(seed)``
    so the same seed always yields the same values.
    """
    shape = _check_shape(shape)
    if isinstance(fill, str):
        if fill not in ("random", "uniform"):
            raise ValueError(f"unknown fill {fill!r}")
        rng = np.random.default_rng(seed)
        if fill == "random":
            return rng.standard_normal(shape).astype(DTYPE)
        return rng.uniform(-1.0, 1.0, shape).astype(DTYPE)
    return np.full(shape, fill, dtype=DTYPE)


def flat_index(shape: Sequence[int], index: Sequence[int]) -> int:
    """Row-major offset of ``index`` within ``shape``."""
    shape = _check_shape(shape)
    if len(index) != len(shape):
        raise InvalidShapeError(f"index rank {len(index)} != shape rank {len(shape)}")
    offset = 0
    for dim, i in zip(shape, index):
        if not 0 <= i < dim:
            raise IndexError(f"index {tuple(index)} out of bounds for {shape}")
        offset = offset * dim + int(i)
    return offset


@dataclass
class GradCheckResult:
    max_error: float
    checked: int
    skipped: int
    worst_index: tuple[int, ...] | None = None
    errors: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    def __float__(self) -> float:
        return self.max_error


def _projected(y: np.ndarray, proj: np.ndarray, where: str, coord) -> float:
    if not np.all(np.isfinite(y)):
        raise NumericFailureError(f"non-finite output in {where} at coordinate {coord}")
    return float(np.dot(y.astype(np.float64).ravel(), proj))


def grad_check_detailed(
    op: Differentiable,
    x: np.ndarray,
    epsilon: float = 1e-3,
    *,
    seed: int = 0,
    max_coords: int | None = None,
    kink_tol: float = 2e-3,
    dtype=np.float64,
) -> GradCheckResult:
    """Compare ``op.backward`` with central differences, element by element.

    The scalar being differentiated is ``sum(R * op.forward(x))`` for a fixed
    random ``R``. Coordinates whose two one-sided slopes disagree by more than
    ``kink_tol * max(1, |slope|)`` straddle a kink (ReLU at 0, max-pool ties)
    and are skipped. ``max_coords`` samples a random subset of coordinates.
    ``x`` is perturbed in ``dtype``; float64 keeps rounding far below the
    tolerance, float32 mirrors training precision.
    """
    if not 1e-6 <= epsilon <= 1e-2:
        raise ValueError(f"epsilon must lie in [1e-6, 1e-2], got {epsilon}")
    rng = np.random.default_rng(seed)
    dtype = np.dtype(dtype).type
    x = np.array(x, dtype=dtype, copy=True)
    if not np.all(np.isfinite(x)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(x))[0])
        raise NumericFailureError(f"non-finite input at coordinate {bad}")

    y0 = op.forward(x.copy())
    proj = rng.standard_normal(y0.size)
    base = _projected(y0, proj, "forward", None)
    analytic = np.asarray(op.backward(proj.reshape(y0.shape).astype(y0.dtype)))
    if analytic.shape != x.shape:
        raise InvalidShapeError(f"backward returned {analytic.shape}, expected {x.shape}")
    if not np.all(np.isfinite(analytic)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(analytic))[0])
        raise NumericFailureError(f"non-finite gradient at coordinate {bad}")

    coords = np.arange(x.size)
    if max_coords is not None and x.size > max_coords:
        coords = np.sort(rng.choice(x.size, size=max_coords, replace=False))

    flat = x.ravel()
    errors = np.full(coords.size, np.nan)
    worst, worst_err, skipped = None, 0.0, 0
    for n, i in enumerate(coords):
        orig = flat[i]
        xp = dtype(orig + dtype(epsilon))
        xm = dtype(orig - dtype(epsilon))
        coord = np.unravel_index(i, x.shape)
        flat[i] = xp
        fp = _projected(op.forward(x.copy()), proj, "forward", coord)
        flat[i] = xm
        fm = _projected(op.forward(x.copy()), proj, "forward", coord)
        flat[i] = orig
        hp = float(xp) - float(orig)
        hm = float(orig) - float(xm)
        central = (fp - fm) / (hp + hm)
        slope_up = (fp - base) / hp
        slope_down = (base - fm) / hm
        if abs(slope_up - slope_down) > kink_tol * max(1.0, abs(central)):
            skipped += 1
            continue
        err = abs(float(analytic.flat[i]) - central) / max(1.0, abs(central))
        errors[n] = err
        if err >= worst_err:
            worst_err, worst = err, tuple(int(c) for c in coord)
    # restore the op's cached state to the unperturbed input
    op.forward(x.copy())
    return GradCheckResult(worst_err, int(coords.size - skipped), skipped, worst, errors)


def grad_check(op: Differentiable, x: np.ndarray, epsilon: float = 1e-3, **kwargs) -> float:
    """Max relative error ``|analytic - numeric| / max(1, |numeric|)`` over ``x``."""
    return grad_check_detailed(op, x, epsilon, **kwargs).max_error
