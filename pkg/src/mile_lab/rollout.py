"""Plain policy rollouts (no intervener): data generation and evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .seeding import rng_for


@dataclass
class Rollout:
    obs: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    success: bool = False

    def __len__(self) -> int:
        return len(self.actions)


ActFn = Callable[[np.ndarray, np.random.Generator], object]


def run_episode(env, act_fn: ActFn, rng: np.random.Generator) -> Rollout:
    roll = Rollout()
    obs = env.reset(rng)
    done = False
    while not done:
        action = act_fn(obs, rng)
        roll.obs.append(obs)
        roll.actions.append(action)
        step = env.step(action)
        roll.rewards.append(step.reward)
        obs, done = step.obs, step.done
        roll.success = step.success
    return roll


def run_episodes(env, act_fn: ActFn, n_episodes: int, seed: int, tag: str = "rollout") -> list[Rollout]:
    return [
        run_episode(env, act_fn, rng_for(seed, tag, i)) for i in range(n_episodes)
    ]


def success_rate(env, act_fn: ActFn, n_episodes: int, seed: int, tag: str = "eval") -> float:
    episodes = run_episodes(env, act_fn, n_episodes, seed, tag)
    return sum(r.success for r in episodes) / n_episodes


def dataset_from_rollouts(rollouts: list[Rollout]) -> tuple[np.ndarray, np.ndarray]:
    obs = np.array([o for r in rollouts for o in r.obs], dtype=np.float64)
    first = rollouts[0].actions[0]
    if np.isscalar(first) or np.asarray(first).ndim == 0:
        actions = np.array([a for r in rollouts for a in r.actions], dtype=np.intp)
    else:
        actions = np.array([a for r in rollouts for a in r.actions], dtype=np.float64)
    return obs, actions
