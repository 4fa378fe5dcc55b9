"""SGD with momentum and learning-rate decay."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidShapeError, NumericFailureError


@dataclass
class OptimizerState:
    """Optimizer hyper-parameters plus one velocity per parameter.

    ``decay_mode="inverse-time"`` uses ``lr = learning_rate / (1 + decay * step)``
    where ``step`` counts updates already applied. ``decay_mode="l2"`` keeps the
    learning rate fixed and adds ``decay * p`` to every gradient instead.
    """

    learning_rate: float = 1e-3
    decay: float = 1e-3
    momentum: float = 0.9
    decay_mode: str = "inverse-time"
    step: int = 0
    velocities: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.decay < 0:
            raise ValueError("decay must be non-negative")
        if self.decay_mode not in ("inverse-time", "l2"):
            raise ValueError(f"unknown decay mode {self.decay_mode!r}")

    @property
    def lr(self) -> float:
        if self.decay_mode == "inverse-time":
            return self.learning_rate / (1.0 + self.decay * self.step)
        return self.learning_rate

    def hyper(self) -> dict:
        return {"learning_rate": self.learning_rate, "decay": self.decay,
                "momentum": self.momentum, "decay_mode": self.decay_mode, "step": self.step}


def sgd_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             state: OptimizerState) -> OptimizerState:
    """In-place update ``v <- m*v - lr*g; p <- p + v`` for every named parameter."""
    lr = state.lr
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericFailureError(f"non-finite gradient for parameter {name!r}")
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise InvalidShapeError(f"gradient {name!r} has shape {g.shape}, parameter {p.shape}")
        if state.decay_mode == "l2":
            g = g + state.decay * p
        v = state.velocities.get(name)
        if v is None:
            v = state.velocities[name] = np.zeros_like(p)
        v *= state.momentum
        v -= lr * g
        p += v
    state.step += 1
    return state
