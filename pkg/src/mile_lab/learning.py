"""Joint policy / mental-model training from intervention data.

Discrete tasks minimize a cross-entropy over |A|+1 classes: each action class
carries the model's probability that the human would intervene with that
action, and the extra class absorbs no-intervention steps. Continuous tasks
blend a binary cross-entropy on the intervention signal (J1, which trains
both networks through the differentiable gate) with the negative
log-likelihood of the human's actions on intervention steps (J2, policy
only):

    J(theta, xi) = lambda * J1(theta, xi) + (1 - lambda) * J2(theta)

The deploy-then-learn loop alternates collecting k episodes under the current
policy (with the human free to take over) and m epochs of minibatch updates
on the aggregated dataset; both parameter vectors are updated from gradients
taken at the same snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bc import LN_2PI
from .datastore import Dataset, EpisodeStore, TransitionRecord, checkpoint
from .diffnet import (
    AdamState,
    CategoricalHead,
    NetSpec,
    Policy,
    Tensor,
    adam_step,
    forward_graph,
)
from .diffnet import tensor as T
from .intervention import InterventionParams
from .rollout import success_rate
from .seeding import rng_for
from .sim_human import SimulatedHuman, run_deployment

NU_HAT_CLAMP = 1e-7
CLASS_PROB_FLOOR = 1e-300  # pure underflow guard; the log gradient is scale-free


class TrainingDivergedError(RuntimeError):
    def __init__(self, iteration: int, message: str):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass
class LossConfig:
    params: InterventionParams
    lam: float = 0.5
    m_samples: int = 16
    batch_size: int = 64
    batches_per_epoch: int | None = None
    epochs: int = 300
    lr: float = 1e-3
    label_robot_action: bool = False  # ablation: label nu=0 steps with a_r instead

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch size and epochs must be >= 1")
        if self.batches_per_epoch is not None and self.batches_per_epoch < 1:
            raise ValueError("batches per epoch must be >= 1")


@dataclass
class TrainState:
    policy_spec: NetSpec
    policy_params: np.ndarray
    mental_spec: NetSpec
    mental_params: np.ndarray
    opt_policy: AdamState
    opt_mental: AdamState
    iteration: int = 0
    loss_history: list = field(default_factory=list)

    @property
    def policy(self) -> Policy:
        return Policy(self.policy_spec, self.policy_params)

    @property
    def mental_model(self) -> Policy:
        return Policy(self.mental_spec, self.mental_params)

    @staticmethod
    def fresh(policy: Policy, mental: Policy, lr: float) -> "TrainState":
        return TrainState(
            policy_spec=policy.spec,
            policy_params=policy.params.copy(),
            mental_spec=mental.spec,
            mental_params=mental.params.copy(),
            opt_policy=AdamState(lr=lr),
            opt_mental=AdamState(lr=lr),
        )


def _batch_arrays(batch: list[TransitionRecord]):
    if not batch:
        raise ValueError("empty batch")
    obs = np.array([r.obs for r in batch], dtype=np.float64)
    nu = np.array([r.nu for r in batch], dtype=np.float64)
    return obs, nu


def _discrete_labels(batch: list[TransitionRecord], n_actions: int, cfg: LossConfig) -> np.ndarray:
    labels = np.empty(len(batch), dtype=np.intp)
    for i, rec in enumerate(batch):
        if rec.nu == 1:
            labels[i] = int(rec.a_h)
        elif cfg.label_robot_action:
            labels[i] = int(rec.a_r)
        else:
            labels[i] = n_actions  # the no-intervention class
    return labels


def _check_finite(value: float, what: str) -> None:
    if not math.isfinite(value):
        raise FloatingPointError(f"{what} is non-finite")


def loss_discrete(
    batch: list[TransitionRecord],
    policy_spec: NetSpec,
    theta: np.ndarray,
    mental_spec: NetSpec,
    xi: np.ndarray,
    cfg: LossConfig,
):
    """(|A|+1)-class cross entropy; returns (J, grad_theta, grad_xi)."""
    obs, _ = _batch_arrays(batch)
    n_actions = policy_spec.head.n_actions
    labels = _discrete_labels(batch, n_actions, cfg)

    theta_t = Tensor(theta, requires_grad=True)
    xi_t = Tensor(xi, requires_grad=True)
    lp = forward_graph(policy_spec, theta_t, obs)  # (B, A) log pi_theta
    pi_hat = T.exp(forward_graph(mental_spec, xi_t, obs))  # (B, A)
    inner = T.sum_(pi_hat * lp, axis=1, keepdims=True)  # E_pihat[ln pi_theta]
    gates = T.normal_cdf((lp - inner - cfg.params.c) * (1.0 / cfg.params.sigma))
    class_probs = T.exp(lp) * gates  # (B, A)
    no_int = T.sum_(class_probs, axis=1, keepdims=True) * (-1.0) + 1.0
    full = T.concat([class_probs, no_int], axis=1)  # (B, A+1)
    # additive floor: keeps the loss finite and the gradient alive when a
    # class saturates near zero early in training
    picked = T.gather(full, labels, axis=1) + CLASS_PROB_FLOOR
    loss = T.mean(T.log(picked)) * (-1.0)
    _check_finite(float(loss.data), "discrete loss")
    loss.backward()
    return float(loss.data), theta_t.grad, xi_t.grad


def _gaussian_heads(policy_spec, theta_t, mental_spec, xi_t, obs):
    mean_p, var_p = forward_graph(policy_spec, theta_t, obs)
    mean_m, var_m = forward_graph(mental_spec, xi_t, obs)
    return mean_p, var_p, mean_m, var_m


def predict_nu_graph(
    policy_spec: NetSpec,
    theta_t: Tensor,
    mental_spec: NetSpec,
    xi_t: Tensor,
    obs: np.ndarray,
    cfg: LossConfig,
    eps: np.ndarray,
):
    """Differentiable intervention-probability estimate for a continuous batch.

    ``eps`` has shape (M, B, d); samples are reparameterized from the policy
    head, and the inner expectation over the mental model is closed-form.
    """
    mean_p, var_p, mean_m, var_m = _gaussian_heads(policy_spec, theta_t, mental_spec, xi_t, obs)
    b, d = mean_p.data.shape
    mean_b = T.reshape(mean_p, (1, b, d))
    var_b = T.reshape(var_p, (1, b, d))
    a = mean_b + T.sqrt(var_b) * Tensor(eps)  # (M, B, d)
    log_p = T.sum_(T.log(var_b * (2.0 * np.pi)) + (a - mean_b) ** 2.0 / var_b, axis=2) * (-0.5)
    cross = T.sum_(
        T.log(var_p * (2.0 * np.pi)) + (var_m + (mean_m - mean_p) ** 2.0) / var_p, axis=1
    ) * (-0.5)  # (B,)
    delta = log_p - T.reshape(cross, (1, b))
    gates = T.normal_cdf((delta - cfg.params.c) * (1.0 / cfg.params.sigma))
    return T.mean(gates, axis=0)  # (B,)


def loss_j1(
    batch: list[TransitionRecord],
    policy_spec: NetSpec,
    theta: np.ndarray,
    mental_spec: NetSpec,
    xi: np.ndarray,
    cfg: LossConfig,
    eps: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
):
    """BCE between predicted and observed intervention signals."""
    obs, nu = _batch_arrays(batch)
    d = policy_spec.head.action_dim
    if eps is None:
        if rng is None:
            raise ValueError("loss_j1 needs eps or rng for the reparameterized samples")
        eps = rng.standard_normal((cfg.m_samples, len(batch), d))
    theta_t = Tensor(theta, requires_grad=True)
    xi_t = Tensor(xi, requires_grad=True)
    nu_hat = predict_nu_graph(policy_spec, theta_t, mental_spec, xi_t, obs, cfg, eps)
    nu_hat = T.clip(nu_hat, NU_HAT_CLAMP, 1.0 - NU_HAT_CLAMP)
    bce = Tensor(nu) * T.log(nu_hat) + Tensor(1.0 - nu) * T.log(nu_hat * (-1.0) + 1.0)
    loss = T.mean(bce) * (-1.0)
    _check_finite(float(loss.data), "J1")
    loss.backward()
    return float(loss.data), theta_t.grad, xi_t.grad


def loss_j2(
    batch: list[TransitionRecord],
    policy_spec: NetSpec,
    theta: np.ndarray,
):
    """Mean NLL of human actions on intervention steps; zero if none present."""
    intervened = [r for r in batch if r.nu == 1]
    if not intervened:
        return 0.0, np.zeros_like(theta), 0
    obs = np.array([r.obs for r in intervened], dtype=np.float64)
    a_h = np.array([r.a_h for r in intervened], dtype=np.float64)
    theta_t = Tensor(theta, requires_grad=True)
    mean_p, var_p = forward_graph(policy_spec, theta_t, obs)
    lp = T.sum_(T.log(var_p) + (Tensor(a_h) - mean_p) ** 2.0 / var_p, axis=1) * (-0.5) + (
        -0.5 * LN_2PI * a_h.shape[1]
    )
    loss = T.mean(lp) * (-1.0)
    _check_finite(float(loss.data), "J2")
    loss.backward()
    return float(loss.data), theta_t.grad, len(intervened)


def loss_total(
    batch: list[TransitionRecord],
    policy_spec: NetSpec,
    theta: np.ndarray,
    mental_spec: NetSpec,
    xi: np.ndarray,
    cfg: LossConfig,
    eps: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
):
    """lambda * J1 + (1 - lambda) * J2 for continuous tasks."""
    j1, g1_theta, g1_xi = loss_j1(batch, policy_spec, theta, mental_spec, xi, cfg, eps=eps, rng=rng)
    j2, g2_theta, _ = loss_j2(batch, policy_spec, theta)
    lam = cfg.lam
    total = lam * j1 + (1.0 - lam) * j2
    g_theta = lam * g1_theta + (1.0 - lam) * g2_theta
    g_xi = lam * g1_xi
    return total, g_theta, g_xi


# -- the learning phase ----------------------------------------------------------


def learning_phase(
    state: TrainState,
    dataset: Dataset,
    cfg: LossConfig,
    seed: int,
    iteration: int = 0,
    on_epoch=None,
) -> float:
    """m epochs of l minibatches of joint updates; returns the final batch loss.

    Gradients for both parameter vectors are evaluated at the same snapshot
    before either update is applied. On a non-finite loss the state is rolled
    back to its values at entry and TrainingDivergedError is raised.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    import copy

    from .diffnet import NonFiniteGradError

    discrete = isinstance(state.policy_spec.head, CategoricalHead)
    snapshot = (
        state.policy_params.copy(),
        state.mental_params.copy(),
        copy.deepcopy(state.opt_policy),
        copy.deepcopy(state.opt_mental),
    )
    noise_rng = rng_for(seed, "j1-noise", iteration)
    last = float("nan")
    try:
        for epoch in range(cfg.epochs):
            batch_seed = int(rng_for(seed, "batches", iteration, epoch).integers(2**31))
            for b_idx, batch in enumerate(dataset.minibatches(cfg.batch_size, batch_seed)):
                if cfg.batches_per_epoch is not None and b_idx >= cfg.batches_per_epoch:
                    break
                if discrete:
                    last, g_theta, g_xi = loss_discrete(
                        batch, state.policy_spec, state.policy_params,
                        state.mental_spec, state.mental_params, cfg,
                    )
                else:
                    last, g_theta, g_xi = loss_total(
                        batch, state.policy_spec, state.policy_params,
                        state.mental_spec, state.mental_params, cfg, rng=noise_rng,
                    )
                state.policy_params = adam_step(state.policy_params, g_theta, state.opt_policy)
                state.mental_params = adam_step(state.mental_params, g_xi, state.opt_mental)
            if on_epoch is not None:
                on_epoch(epoch, last)
    except (FloatingPointError, NonFiniteGradError) as exc:
        (state.policy_params, state.mental_params,
         state.opt_policy, state.opt_mental) = snapshot
        raise TrainingDivergedError(iteration, str(exc)) from exc
    state.loss_history.append(last)
    return last


def predict_nu(
    state: TrainState,
    obs_matrix: np.ndarray,
    cfg: LossConfig,
    m_samples: int = 64,
    seed: int = 0,
) -> np.ndarray:
    """Model-based intervention probabilities for a batch of observations.

    Uses the trained policy in the expert role and the trained mental model in
    the robot-model role; closed form for discrete heads, fixed-noise
    Monte-Carlo for gaussian heads.
    """
    from .intervention import intervene_prob_continuous, intervene_prob_discrete

    obs_matrix = np.atleast_2d(np.asarray(obs_matrix, dtype=np.float64))
    policy_out = state.policy.dist(obs_matrix)
    mental_out = state.mental_model.dist(obs_matrix)
    n = obs_matrix.shape[0]
    out = np.empty(n)
    if isinstance(state.policy_spec.head, CategoricalHead):
        for i in range(n):
            est = intervene_prob_discrete(policy_out.probs[i], mental_out.probs[i], cfg.params)
            out[i] = est.p_intervene
        return out
    d = state.policy_spec.head.action_dim
    eps = rng_for(seed, "predict-nu").standard_normal((m_samples, d))
    for i in range(n):
        est = intervene_prob_continuous(
            policy_out.mean[i], policy_out.var[i], mental_out.mean[i], mental_out.var[i],
            cfg.params, m_samples, eps=eps,
        )
        out[i] = est.p_intervene
    return out


@dataclass
class IterationMetrics:
    iteration: int
    episodes: int            # cumulative deployment episodes
    interventions: int       # cumulative intervention steps
    intervention_rate: float # over all recorded steps so far
    loss: float
    success_rate: float
    seed: int


def run_mile(
    env,
    initial_policy: Policy,
    human: SimulatedHuman,
    mental_init: Policy,
    cfg: LossConfig,
    n_iterations: int,
    k_episodes: int,
    seed: int,
    store: EpisodeStore | None = None,
    eval_episodes: int = 100,
    checkpoint_dir=None,
) -> tuple[TrainState, list[IterationMetrics]]:
    """Alternate deployment and learning for ``n_iterations`` rounds.

    The policy starts as a clone of the initial policy; the mental-model net
    starts from ``mental_init`` (a clone of the BC net fitted on the initial
    policy's rollouts). Returns the final state plus one metrics row per
    iteration; the dataset aggregates across iterations.
    """
    state = TrainState.fresh(initial_policy, mental_init, cfg.lr)
    metrics: list[IterationMetrics] = []
    all_records: list[TransitionRecord] = []
    total_eps = 0
    for i in range(n_iterations):
        episodes = run_deployment(env, state.policy, human, k_episodes, seed, iteration=i)
        if store is not None:
            for ep in episodes:
                store.append_episode(ep)
        for ep in episodes:
            all_records.extend(ep)
        total_eps += k_episodes
        dataset = Dataset(list(all_records))
        loss = learning_phase(state, dataset, cfg, seed, iteration=i)
        state.iteration = i + 1
        rate = success_rate(
            env, state.policy.act, eval_episodes, int(rng_for(seed, "eval", i).integers(2**31))
        )
        metrics.append(
            IterationMetrics(
                iteration=i,
                episodes=total_eps,
                interventions=dataset.n_interventions,
                intervention_rate=dataset.intervention_rate,
                loss=loss,
                success_rate=rate,
                seed=seed,
            )
        )
        if checkpoint_dir is not None:
            checkpoint(state, f"{checkpoint_dir}/iter_{i}")
    return state, metrics
