"""Suboptimal initial policies: behavioral cloning of a corrupted expert.

``corruption`` interpolates the data-generating teacher from the expert
(corruption 0) toward random behavior (corruption 1). GridNav offers two
corruption styles:

- "diffuse" (default): Boltzmann(Q*/tau) with tau log-interpolated from the
  expert temperature up to a near-uniform high temperature. The teacher is
  increasingly indecisive everywhere; failures come from diffusion into
  hazards and timeouts.
- "decisive": Boltzmann((Q~)/tau) at a fixed low temperature, where Q~
  promotes one wrong action past the optimum at a corruption-fraction of
  cells. The teacher stays confident but is systematically wrong in places.
  This style matters for studying intervention prediction: the clone doubles
  as the human's mental model, and the probit gate only produces strongly
  state-dependent intervention probabilities when that belief is decisive
  rather than uniformly uncertain.

ReachGap2D's teacher follows the scripted expert with inflated action noise
and takes a uniformly random step with probability ``corruption``.

The cloned net should land at an intermediate success rate; the default band
check raises when it does not, with the knob to retune.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..bc import BCConfig, bc_train
from ..diffnet import CategoricalHead, GaussianHead, NetSpec, Policy, init_params
from ..intervention import boltzmann_policy
from ..rollout import dataset_from_rollouts, run_episodes, success_rate
from ..seeding import rng_for
from .gridnav import GridNavEnv, N_ACTIONS, QTable
from .reachgap import ReachGap2DEnv, expert_action_mean

HIDDEN_DIMS = (64, 64)

GRIDNAV_EXPERT_TEMPERATURE = 0.02
GRIDNAV_HIGH_TEMPERATURE = 50.0
GRIDNAV_TEACHER_TEMPERATURE = 0.04
GRIDNAV_WRONG_ACTION_MARGIN = 0.2
CORRUPTION_STYLES = ("diffuse", "decisive")
REACHGAP_EXPERT_NOISE_STD = 0.005
REACHGAP_NOISE_INFLATION = 8.0
REACHGAP_TEACHER_NOISE_FLOOR = 0.02


class SuccessBandError(RuntimeError):
    pass


@dataclass
class InitialPolicyConfig:
    n_teacher_episodes: int = 150
    band: tuple[float, float] | None = (0.2, 0.6)
    eval_episodes: int = 200
    style: str = "diffuse"
    coverage_frac: float = 0.0  # ReachGap: fraction of rollouts from uniform workspace starts
    bc: BCConfig = field(default_factory=lambda: BCConfig(epochs=60, batch_size=64, lr=1e-3))

    def __post_init__(self):
        if self.style not in CORRUPTION_STYLES:
            raise ValueError(f"corruption style must be one of {CORRUPTION_STYLES}")
        if not 0.0 <= self.coverage_frac <= 1.0:
            raise ValueError("coverage_frac must lie in [0, 1]")


def gridnav_diffuse_temperature(corruption: float) -> float:
    lo, hi = GRIDNAV_EXPERT_TEMPERATURE, GRIDNAV_HIGH_TEMPERATURE
    return float(lo ** (1.0 - corruption) * hi**corruption)


def gridnav_perturbed_q(q_table: QTable, corruption: float, seed: int) -> np.ndarray:
    """Q-values with a wrong action decisively promoted at a fraction of cells.

    ``corruption`` is the fraction of free cells whose teacher preference is
    flipped; each corrupted cell gets one non-optimal action boosted past the
    optimum by a fixed margin.
    """
    q = q_table.q.copy()
    spec = q_table.spec
    free = spec.free_cells()
    rng = rng_for(seed, "teacher-q-corrupt")
    n_wrong = int(round(corruption * len(free)))
    for pick in rng.choice(len(free), size=n_wrong, replace=False):
        idx = spec.index(free[pick])
        best = int(np.argmax(q[idx]))
        wrong = int(rng.choice([a for a in range(N_ACTIONS) if a != best]))
        q[idx, wrong] = q[idx, best] + GRIDNAV_WRONG_ACTION_MARGIN
    return q


def gridnav_teacher_act(env: GridNavEnv, perturbed_q: np.ndarray,
                        temperature: float = GRIDNAV_TEACHER_TEMPERATURE):
    def act(obs, rng):
        probs = boltzmann_policy(perturbed_q[env.cell_index_from_obs(obs)], temperature)
        return int(rng.choice(N_ACTIONS, p=probs))

    return act


def reachgap_teacher_act(env: ReachGap2DEnv, corruption: float):
    # noise floor keeps the demonstration tube wide enough to clone robustly,
    # even for an uncorrupted teacher
    noise_std = max(
        REACHGAP_TEACHER_NOISE_FLOOR,
        REACHGAP_EXPERT_NOISE_STD * (1.0 + REACHGAP_NOISE_INFLATION * corruption),
    )
    max_step = env.spec.max_step

    def act(obs, rng):
        if rng.random() < corruption:
            return rng.uniform(-max_step, max_step, size=2)
        mean = expert_action_mean(env.spec, env.pos_from_obs(obs))
        return mean + noise_std * rng.standard_normal(2)

    return act


def _episode_from(env, act_fn, pos, rng):
    from ..rollout import Rollout

    roll = Rollout()
    obs = env.reset(rng, pos=pos)
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


def policy_spec_for(env) -> NetSpec:
    if env.action_kind == "discrete":
        return NetSpec(env.obs_dim, HIDDEN_DIMS, CategoricalHead(env.n_actions))
    return NetSpec(env.obs_dim, HIDDEN_DIMS, GaussianHead(env.action_dim))


def init_policy_params(spec: NetSpec, seed: int, action_scale: float | None = None,
                       head_scale: float = 0.01) -> np.ndarray:
    """Fresh policy parameters with a small output head.

    Gaussian heads additionally get their log-variance bias set so the initial
    std matches ``action_scale``; starting near the true action magnitude keeps
    early NLL gradients well-conditioned (a unit-variance start swamps the mean
    gradient when actions are tiny).
    """
    params = init_params(spec, seed)
    entries = spec.layout()
    w_name, w_start, w_stop, _ = entries[-2]
    assert w_name.startswith("W")
    params[w_start:w_stop] *= head_scale
    if isinstance(spec.head, GaussianHead) and action_scale is not None:
        _, b_start, b_stop, _ = entries[-1]
        d = spec.head.action_dim
        params[b_start + d : b_stop] = 2.0 * np.log(action_scale)
    return params


def make_initial_policy(
    env,
    corruption: float,
    seed: int,
    q_table: QTable | None = None,
    cfg: InitialPolicyConfig | None = None,
) -> Policy:
    """Clone a corruption-weakened teacher into a fresh policy net."""
    cfg = cfg or InitialPolicyConfig()
    if not 0.0 <= corruption <= 1.0:
        raise ValueError("corruption must lie in [0, 1]")
    if isinstance(env, GridNavEnv):
        if q_table is None:
            raise ValueError("GridNav initial policy needs the solved Q-table")
        if cfg.style == "decisive":
            teacher = gridnav_teacher_act(env, gridnav_perturbed_q(q_table, corruption, seed))
        else:
            teacher = gridnav_teacher_act(
                env, q_table.q, gridnav_diffuse_temperature(corruption)
            )
        rollouts = run_episodes(env, teacher, cfg.n_teacher_episodes, seed, tag="teacher")
    elif isinstance(env, ReachGap2DEnv):
        teacher = reachgap_teacher_act(env, corruption)
        # optional coverage rollouts start from uniform workspace positions so
        # the clone's action field stays usable off the demonstration tube
        n_cover = int(round(cfg.coverage_frac * cfg.n_teacher_episodes))
        rollouts = run_episodes(
            env, teacher, cfg.n_teacher_episodes - n_cover, seed, tag="teacher"
        )
        cover_rng = rng_for(seed, "teacher-coverage")
        for _ in range(n_cover):
            while True:
                pos = cover_rng.random(2)
                if abs(pos[1] - env.spec.wall_y) > 0.02:
                    break
            rollouts.append(_episode_from(env, teacher, pos, cover_rng))
    else:
        raise TypeError(f"unsupported environment {type(env).__name__}")

    obs, actions = dataset_from_rollouts(rollouts)
    spec = policy_spec_for(env)
    scale = None if env.action_kind == "discrete" else 0.5 * env.spec.max_step
    params0 = init_policy_params(spec, seed, action_scale=scale)
    result = bc_train(spec, params0, obs, actions, cfg.bc, seed)
    policy = Policy(spec, result.params)

    if cfg.band is not None:
        rate = success_rate(
            env, policy.act, cfg.eval_episodes, int(rng_for(seed, "init-eval").integers(2**31))
        )
        lo, hi = cfg.band
        if not lo <= rate <= hi:
            raise SuccessBandError(
                f"initial policy success {rate:.2f} outside target band [{lo}, {hi}]; "
                f"retune corruption (currently {corruption})"
            )
    return policy
