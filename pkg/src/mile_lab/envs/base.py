"""Shared episode machinery: step results and observation stacking."""

from __future__ import annotations

from typing import Any, NamedTuple

import numpy as np

STACK_DEPTH = 4  # current frame plus the previous three


class StepResult(NamedTuple):
    obs: np.ndarray
    reward: float
    done: bool
    success: bool
    info: dict[str, Any]


class FrameStack:
    """Concatenates the current raw state with the previous three.

    Frame order is newest-first: ``obs[0:d]`` is the state at t, ``obs[d:2d]``
    at t-1, and so on, zero-padded before the episode start.
    """

    def __init__(self, raw_dim: int, depth: int = STACK_DEPTH):
        self.raw_dim = raw_dim
        self.depth = depth
        self._frames = np.zeros((depth, raw_dim), dtype=np.float64)

    def reset(self, first: np.ndarray) -> np.ndarray:
        self._frames[:] = 0.0
        self._frames[0] = first
        return self.obs()

    def push(self, frame: np.ndarray) -> np.ndarray:
        self._frames[1:] = self._frames[:-1]
        self._frames[0] = frame
        return self.obs()

    def obs(self) -> np.ndarray:
        return self._frames.reshape(-1).copy()


def as_rng(seed_or_rng: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
