"""Adam optimizer on flat parameter vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradError(ValueError):
    """Raised when a step is attempted with NaN or infinite gradients."""


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray = field(default_factory=lambda: np.zeros(0))
    v: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def _ensure(self, n: int) -> None:
        if self.m.shape != (n,):
            self.m = np.zeros(n, dtype=np.float64)
            self.v = np.zeros(n, dtype=np.float64)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> np.ndarray:
    """One Adam update; mutates ``state`` and returns the new parameter vector.

    The step is refused (state untouched) if any gradient entry is non-finite.
    """
    if params.shape != grads.shape:
        raise ValueError(f"shape mismatch: params {params.shape} vs grads {grads.shape}")
    if not np.all(np.isfinite(grads)):
        bad = int(np.flatnonzero(~np.isfinite(grads))[0])
        raise NonFiniteGradError(f"non-finite gradient at parameter index {bad}")
    state._ensure(params.size)
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads**2
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
