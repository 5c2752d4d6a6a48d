"""ReachGap2D: reach a goal point through a narrow gap in a wall.

The workspace is the unit square with a horizontal wall at ``wall_y`` broken
by a gap of half-width ``gap_half_width`` centered at ``gap_x``. Actions are
position deltas clipped to a maximum step norm. A scripted expert heads for
the gap center and then the goal, which makes the noiseless expert provably
successful and the noisy expert an exact gaussian policy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import FrameStack, StepResult, as_rng


@dataclass(frozen=True)
class ReachGap2DSpec:
    wall_y: float = 0.5
    gap_x: float = 0.7
    gap_half_width: float = 0.04
    goal: tuple[float, float] = (0.2, 0.9)
    success_radius: float = 0.03
    max_step: float = 0.05
    horizon: int = 200
    start_low: tuple[float, float] = (0.6, 0.05)
    start_high: tuple[float, float] = (0.8, 0.15)

    def __post_init__(self):
        if self.success_radius <= 0:
            raise ValueError("success radius must be positive")
        if not 0 < self.gap_half_width < 0.5:
            raise ValueError("gap half-width must lie in (0, 0.5)")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not (0 < self.wall_y < 1):
            raise ValueError("wall must lie inside the workspace")
        lo, hi = np.asarray(self.start_low), np.asarray(self.start_high)
        if np.any(lo > hi) or np.any(lo < 0) or np.any(hi > 1):
            raise ValueError("start box must be a valid region inside the workspace")
        if hi[1] >= self.wall_y:
            raise ValueError("start box must lie entirely below the wall")
        if self.goal[1] <= self.wall_y:
            raise ValueError("goal must lie above the wall")
        self._check_gap_required()

    def _check_gap_required(self):
        # Straight start-to-goal lines must hit the wall, not thread the gap.
        gx, gy = self.goal
        xs = np.linspace(self.start_low[0], self.start_high[0], 25)
        ys = np.linspace(self.start_low[1], self.start_high[1], 25)
        for x0 in xs:
            for y0 in ys:
                t = (self.wall_y - y0) / (gy - y0)
                x_cross = x0 + t * (gx - x0)
                if abs(x_cross - self.gap_x) <= self.gap_half_width:
                    raise ValueError(
                        "straight start-to-goal line passes through the gap; "
                        "the task must require gap passage"
                    )

    @property
    def gap_center(self) -> np.ndarray:
        return np.array([self.gap_x, self.wall_y])


def clip_step(delta: np.ndarray, max_step: float) -> tuple[np.ndarray, bool]:
    delta = np.asarray(delta, dtype=np.float64)
    norm = float(np.linalg.norm(delta))
    if norm > max_step:
        return delta * (max_step / norm), True
    return delta, False


class ReachGap2DEnv:
    action_kind = "continuous"
    action_dim = 2

    def __init__(self, spec: ReachGap2DSpec):
        self.spec = spec
        self.raw_dim = 2
        self.obs_dim = 4 * self.raw_dim
        self._stack = FrameStack(self.raw_dim)
        self._pos = np.zeros(2)
        self._t = 0
        self._done = True

    def reset(self, seed_or_rng=None, pos: np.ndarray | None = None) -> np.ndarray:
        """Start a fresh episode; ``pos`` overrides the start distribution
        (used for coverage data collection, not by the task itself)."""
        rng = as_rng(seed_or_rng)
        if pos is not None:
            self._pos = np.clip(np.asarray(pos, dtype=np.float64).reshape(2), 0.0, 1.0)
        else:
            lo = np.asarray(self.spec.start_low)
            hi = np.asarray(self.spec.start_high)
            self._pos = lo + (hi - lo) * rng.random(2)
        self._t = 0
        self._done = False
        return self._stack.reset(self._pos.copy())

    def _blocked(self, src: np.ndarray, dst: np.ndarray) -> bool:
        w = self.spec.wall_y
        below_src, below_dst = src[1] < w, dst[1] < w
        if below_src == below_dst:
            return False
        t = (w - src[1]) / (dst[1] - src[1])
        x_cross = src[0] + t * (dst[0] - src[0])
        return abs(x_cross - self.spec.gap_x) > self.spec.gap_half_width

    def step(self, action: np.ndarray) -> StepResult:
        if self._done:
            raise RuntimeError("step() called on a finished episode")
        action = np.asarray(action, dtype=np.float64).reshape(2)
        delta, clipped = clip_step(action, self.spec.max_step)
        candidate = np.clip(self._pos + delta, 0.0, 1.0)
        if self._blocked(self._pos, candidate):
            candidate = self._pos.copy()
        self._pos = candidate
        self._t += 1
        dist = float(np.linalg.norm(self._pos - np.asarray(self.spec.goal)))
        success = dist <= self.spec.success_radius
        self._done = success or self._t >= self.spec.horizon
        reward = 1.0 if success else 0.0
        obs = self._stack.push(self._pos.copy())
        return StepResult(obs, reward, self._done, success, {"clipped": clipped, "pos": self._pos.copy()})

    @property
    def pos(self) -> np.ndarray:
        return self._pos.copy()

    @property
    def t(self) -> int:
        return self._t

    def pos_from_obs(self, obs: np.ndarray) -> np.ndarray:
        return np.asarray(obs[: self.raw_dim], dtype=np.float64)


def expert_action_mean(spec: ReachGap2DSpec, pos: np.ndarray) -> np.ndarray:
    """Clipped step toward the gap center while below the wall, then the goal."""
    pos = np.asarray(pos, dtype=np.float64)
    passed = pos[1] >= spec.wall_y
    target = np.asarray(spec.goal) if passed else spec.gap_center
    to_target = target - pos
    dist = float(np.linalg.norm(to_target))
    if dist < 1e-12:
        return np.zeros(2)
    return to_target * (min(dist, spec.max_step) / dist)


def scripted_expert(
    spec: ReachGap2DSpec, pos: np.ndarray, noise_std: float
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian expert action distribution: (mean, diagonal variance)."""
    mean = expert_action_mean(spec, pos)
    var = np.full(2, max(noise_std, 0.0) ** 2)
    return mean, var
