"""Simulated expert intervener.

The simulated human pairs an expert action source (exact Boltzmann policy on
GridNav, scripted gaussian on ReachGap2D) with a mental model of the robot
fitted by behavioral cloning on initial-policy rollouts. At each state it
computes the intervention probability from the probit model and, on
intervention, supplies its own action. The decision never sees the robot's
sampled action for that step.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bc import BCConfig, bc_train
from .datastore import TransitionRecord
from .diffnet import Policy, init_params
from .envs import GridNavEnv, QTable, ReachGap2DEnv, policy_spec_for
from .envs.reachgap import scripted_expert
from .intervention import (
    InterventionParams,
    boltzmann_policy,
    intervene_prob_continuous,
    joint_action_distribution,
)
from .rollout import dataset_from_rollouts, run_episodes
from .seeding import rng_for

MENTAL_MODEL_HOLDOUT = 0.1
CONTINUOUS_DECIDE_SAMPLES = 32
INTERVENTION_NOISE_STD = 0.005


def fit_mental_model(
    initial_policy: Policy,
    env,
    n_rollouts: int = 100,
    seed: int = 0,
    bc_cfg: BCConfig | None = None,
) -> tuple[Policy, float]:
    """BC net fitted to the initial policy's own rollouts; returns (net, holdout NLL)."""
    if n_rollouts < 1:
        raise ValueError("need at least one rollout to fit a mental model")
    rollouts = run_episodes(env, initial_policy.act, n_rollouts, seed, tag="mental-model")
    obs, actions = dataset_from_rollouts(rollouts)
    spec = policy_spec_for(env)
    cfg = bc_cfg or BCConfig(epochs=60, batch_size=64, lr=1e-3, holdout_frac=MENTAL_MODEL_HOLDOUT)
    result = bc_train(spec, init_params(spec, seed + 1), obs, actions, cfg, seed)
    return Policy(spec, result.params), result.holdout_nll


@dataclass
class SimulatedHuman:
    """Expert + mental model + gate parameters.

    Exactly one of ``q_table`` (discrete) or ``env_spec`` (continuous) is set.
    """

    mental_model: Policy
    params: InterventionParams
    q_table: QTable | None = None
    temperature: float = 1.0
    env_spec: object | None = None
    expert_noise_std: float = INTERVENTION_NOISE_STD
    m_samples: int = CONTINUOUS_DECIDE_SAMPLES
    sticky_steps: int = 0

    def __post_init__(self):
        if (self.q_table is None) == (self.env_spec is None):
            raise ValueError("provide exactly one of q_table or env_spec")

    @property
    def kind(self) -> str:
        return "discrete" if self.q_table is not None else "continuous"

    def with_params(self, params: InterventionParams) -> "SimulatedHuman":
        return replace(self, params=params)

    # -- expert/mental distributions at a state --------------------------------

    def _raw_dim(self) -> int:
        return self.mental_model.spec.input_dim // 4

    def expert_policy_discrete(self, obs: np.ndarray) -> np.ndarray:
        cell = int(np.argmax(obs[: self._raw_dim()]))
        return boltzmann_policy(self.q_table.q[cell], self.temperature)

    def expert_gaussian(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pos = np.asarray(obs[:2], dtype=np.float64)
        return scripted_expert(self.env_spec, pos, self.expert_noise_std)

    def p_intervene(self, obs: np.ndarray, rng: np.random.Generator | None = None) -> float:
        """Closed form for discrete states; Monte-Carlo for continuous ones."""
        if self.kind == "discrete":
            pi_h = self.expert_policy_discrete(obs)
            pi_hat = self.mental_model.dist(obs).probs
            dist = joint_action_distribution(pi_h, pi_hat, self.params)
            return float(1.0 - dist[-1])
        mean_h, var_h = self.expert_gaussian(obs)
        mm = self.mental_model.dist(obs)
        est = intervene_prob_continuous(
            mean_h, var_h, mm.mean, mm.var, self.params, self.m_samples,
            rng=rng or np.random.default_rng(0),
        )
        return est.p_intervene

    def decide(self, obs: np.ndarray, rng: np.random.Generator):
        """Sample (nu, a_h); a_h is None when not intervening.

        The decision depends only on the state observation: the robot's
        pending action is never an input.
        """
        if self.kind == "discrete":
            pi_h = self.expert_policy_discrete(obs)
            pi_hat = self.mental_model.dist(obs).probs
            dist = joint_action_distribution(pi_h, pi_hat, self.params)
            p = float(1.0 - dist[-1])
            if rng.random() >= p:
                return 0, None
            cond = dist[:-1] / max(dist[:-1].sum(), 1e-300)
            return 1, int(rng.choice(len(cond), p=cond))
        mean_h, var_h = self.expert_gaussian(obs)
        mm = self.mental_model.dist(obs)
        est = intervene_prob_continuous(
            mean_h, var_h, mm.mean, mm.var, self.params, self.m_samples, rng=rng
        )
        if rng.random() >= est.p_intervene:
            return 0, None
        a_h = mean_h + self.expert_noise_std * rng.standard_normal(mean_h.shape)
        return 1, a_h


def run_deployment(
    env,
    robot_policy: Policy,
    human: SimulatedHuman,
    k_episodes: int,
    seed: int,
    iteration: int = 0,
    source: str = "sim_human",
) -> list[list[TransitionRecord]]:
    """Collect k episodes where the human may take over; records every tuple.

    The robot action is sampled and recorded at every step even when the human
    intervenes; the executed action is the human's on intervention steps.
    One RNG stream per episode, derived from (seed, episode index).
    """
    if not isinstance(env, (GridNavEnv, ReachGap2DEnv)):
        raise TypeError(f"unsupported environment {type(env).__name__}")
    episodes: list[list[TransitionRecord]] = []
    for ep in range(k_episodes):
        rng = rng_for(seed, "deployment", iteration, ep)
        records: list[TransitionRecord] = []
        obs = env.reset(rng)
        done = False
        t = 0
        sticky_left = 0
        while not done:
            a_r = robot_policy.act(obs, rng)
            nu, a_h = human.decide(obs, rng)
            if nu == 1:
                sticky_left = human.sticky_steps
            elif sticky_left > 0:
                nu = 1
                a_h = _expert_action(human, obs, rng)
                sticky_left -= 1
            executed = a_h if nu == 1 else a_r
            step = env.step(executed)
            records.append(
                TransitionRecord(
                    ep=ep, t=t, obs=obs, a_r=a_r, a_h=a_h, nu=nu,
                    next_obs=step.obs, reward=step.reward, done=step.done,
                    success=step.success, iter=iteration, source=source,
                )
            )
            obs, done = step.obs, step.done
            t += 1
        episodes.append(records)
    return episodes


def _expert_action(human: SimulatedHuman, obs: np.ndarray, rng: np.random.Generator):
    if human.kind == "discrete":
        pi_h = human.expert_policy_discrete(obs)
        return int(rng.choice(len(pi_h), p=pi_h))
    mean_h, _ = human.expert_gaussian(obs)
    return mean_h + human.expert_noise_std * rng.standard_normal(mean_h.shape)


def intervention_rate(episodes: list[list[TransitionRecord]]) -> float:
    steps = sum(len(ep) for ep in episodes)
    return sum(r.nu for ep in episodes for r in ep) / steps if steps else 0.0
