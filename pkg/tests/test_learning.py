import math

import numpy as np
import pytest
from scipy.special import ndtr

from mile_lab.datastore import Dataset, TransitionRecord
from mile_lab.diffnet import (
    CategoricalHead,
    GaussianHead,
    NetSpec,
    Policy,
    grad_check,
    init_params,
)
from mile_lab.intervention import InterventionParams, intervene_prob_continuous
from mile_lab.learning import (
    LossConfig,
    TrainState,
    TrainingDivergedError,
    learning_phase,
    loss_discrete,
    loss_j1,
    loss_j2,
    loss_total,
    predict_nu,
    run_mile,
)


def record(obs, a_r, a_h, nu, t=0, done=False):
    return TransitionRecord(
        ep=0, t=t, obs=np.asarray(obs, dtype=np.float64), a_r=a_r, a_h=a_h, nu=nu,
        next_obs=np.zeros_like(np.asarray(obs, dtype=np.float64)), reward=0.0,
        done=done, success=False, iter=0, source="sim_human",
    )


def discrete_batch(rng, n, obs_dim, n_actions):
    return [
        record(
            rng.normal(size=obs_dim),
            int(rng.integers(n_actions)),
            int(rng.integers(n_actions)) if nu else None,
            nu,
            t=i,
            done=(i == n - 1),
        )
        for i, nu in enumerate((rng.random(n) < 0.4).astype(int))
    ]


def continuous_batch(rng, n, obs_dim, d):
    return [
        record(
            rng.normal(size=obs_dim),
            rng.normal(size=d) * 0.05,
            rng.normal(size=d) * 0.05 if nu else None,
            nu,
            t=i,
            done=(i == n - 1),
        )
        for i, nu in enumerate((rng.random(n) < 0.4).astype(int))
    ]


def bias_only_params(spec, bias):
    """Zero weights; final-layer bias set to fixed logits/head values."""
    params = np.zeros(spec.n_params)
    _, start, stop, _ = spec.layout()[-1]
    params[start:stop] = bias
    return params


class TestLossDiscrete:
    def test_saturated_prediction_near_zero_loss(self, rng):
        spec = NetSpec(3, (4,), CategoricalHead(4))
        theta = bias_only_params(spec, [40.0, 0.0, 0.0, 0.0])
        xi = bias_only_params(spec, [0.0, 40.0, 0.0, 0.0])
        cfg = LossConfig(params=InterventionParams(c=1.0, sigma=1.0))
        batch = [record(rng.normal(size=3), 1, 0, 1, t=i, done=(i == 4)) for i in range(5)]
        j, _, _ = loss_discrete(batch, spec, theta, spec, xi, cfg)
        assert j < 1e-9

    def test_uniform_full_distribution_gives_log_n_classes(self, rng):
        # zero nets give uniform pi_theta and pi_hat; choosing Phi(-c/sigma) =
        # A/(A+1) makes all A+1 classes equal, so J = ln(A+1) for any labels
        n_actions = 4
        spec = NetSpec(3, (4,), CategoricalHead(n_actions))
        theta = np.zeros(spec.n_params)
        xi = np.zeros(spec.n_params)
        from scipy.special import ndtri

        c = -float(ndtri(n_actions / (n_actions + 1)))
        cfg = LossConfig(params=InterventionParams(c=c, sigma=1.0))
        batch = discrete_batch(rng, 8, 3, n_actions)
        j, _, _ = loss_discrete(batch, spec, theta, spec, xi, cfg)
        assert j == pytest.approx(math.log(n_actions + 1), rel=1e-9)

    def test_gradients_match_finite_differences(self, rng):
        spec = NetSpec(4, (10, 10), CategoricalHead(3))
        theta, xi = init_params(spec, 1), init_params(spec, 2)
        cfg = LossConfig(params=InterventionParams(c=0.3, sigma=0.9))
        batch = discrete_batch(rng, 10, 4, 3)
        rep_t = grad_check(
            lambda p: loss_discrete(batch, spec, p, spec, xi, cfg)[:2], theta, tol=1e-4
        )
        assert rep_t.passed, rep_t
        rep_x = grad_check(
            lambda p: (
                loss_discrete(batch, spec, theta, spec, p, cfg)[0],
                loss_discrete(batch, spec, theta, spec, p, cfg)[2],
            ),
            xi,
            tol=1e-4,
        )
        assert rep_x.passed, rep_x

    def test_empty_batch_rejected(self):
        spec = NetSpec(3, (4,), CategoricalHead(2))
        cfg = LossConfig(params=InterventionParams(c=0.0))
        with pytest.raises(ValueError):
            loss_discrete([], spec, np.zeros(spec.n_params), spec, np.zeros(spec.n_params), cfg)

    def test_robot_action_label_ablation(self, rng):
        spec = NetSpec(3, (6,), CategoricalHead(3))
        theta, xi = init_params(spec, 3), init_params(spec, 4)
        batch = [record(rng.normal(size=3), 2, None, 0, t=i, done=(i == 3)) for i in range(4)]
        base = LossConfig(params=InterventionParams(c=0.5))
        ablated = LossConfig(params=InterventionParams(c=0.5), label_robot_action=True)
        j_no, _, _ = loss_discrete(batch, spec, theta, spec, xi, base)
        j_ar, _, _ = loss_discrete(batch, spec, theta, spec, xi, ablated)
        assert j_no != j_ar


class TestLossJ1:
    def _setup(self, rng, n=8):
        spec = NetSpec(4, (8, 8), GaussianHead(2))
        theta, xi = init_params(spec, 5) * 0.3, init_params(spec, 6) * 0.3
        batch = continuous_batch(rng, n, 4, 2)
        eps = np.random.default_rng(42).standard_normal((8, n, 2))
        return spec, theta, xi, batch, eps

    def test_saturated_low_nu_hat_near_zero_loss(self, rng):
        spec, theta, _, _, eps = self._setup(rng)
        batch = [record(rng.normal(size=4), np.zeros(2), None, 0, t=i, done=(i == 7)) for i in range(8)]
        cfg = LossConfig(params=InterventionParams(c=1e6, sigma=1.0), m_samples=8)
        j, _, _ = loss_j1(batch, spec, theta, spec, theta.copy(), cfg, eps=eps)
        assert j == pytest.approx(0.0, abs=1e-6)

    def test_flat_gate_gives_ln2(self, rng):
        spec, theta, xi, batch, eps = self._setup(rng)
        cfg = LossConfig(params=InterventionParams(c=0.0, sigma=1e12), m_samples=8)
        j, _, _ = loss_j1(batch, spec, theta, spec, xi, cfg, eps=eps)
        assert j == pytest.approx(math.log(2.0), rel=1e-9)

    def test_matches_numpy_estimator_on_common_noise(self, rng):
        spec, theta, xi, batch, eps = self._setup(rng, n=3)
        cfg = LossConfig(params=InterventionParams(c=0.4, sigma=1.1), m_samples=8)
        from mile_lab.diffnet import forward

        obs = np.array([r.obs for r in batch])
        pol, mm = forward(spec, theta, obs), forward(spec, xi, obs)
        nu_hats = [
            intervene_prob_continuous(
                pol.mean[i], pol.var[i], mm.mean[i], mm.var[i], cfg.params, 8,
                eps=eps[:, i, :],
            ).p_intervene
            for i in range(3)
        ]
        nu = np.array([r.nu for r in batch], dtype=float)
        expected = -np.mean(nu * np.log(nu_hats) + (1 - nu) * np.log1p(-np.asarray(nu_hats)))
        j, _, _ = loss_j1(batch, spec, theta, spec, xi, cfg, eps=eps)
        assert j == pytest.approx(expected, rel=1e-9)

    def test_gradients_match_finite_differences(self, rng):
        spec, theta, xi, batch, eps = self._setup(rng)
        cfg = LossConfig(params=InterventionParams(c=0.4, sigma=1.1), m_samples=8)
        rep_t = grad_check(lambda p: loss_j1(batch, spec, p, spec, xi, cfg, eps=eps)[:2], theta, tol=1e-4)
        assert rep_t.passed, rep_t
        rep_x = grad_check(
            lambda p: (
                loss_j1(batch, spec, theta, spec, p, cfg, eps=eps)[0],
                loss_j1(batch, spec, theta, spec, p, cfg, eps=eps)[2],
            ),
            xi,
            tol=1e-4,
        )
        assert rep_x.passed, rep_x


class TestLossJ2:
    def test_unit_gaussian_at_mean_gives_ln_2pi(self):
        spec = NetSpec(3, (4,), GaussianHead(2))
        theta = np.zeros(spec.n_params)  # mean 0, variance 1
        batch = [record(np.ones(3), np.zeros(2), np.zeros(2), 1, t=i, done=(i == 2)) for i in range(3)]
        j, _, n = loss_j2(batch, spec, theta)
        assert n == 3
        assert j == pytest.approx(math.log(2.0 * math.pi), rel=1e-12)

    def test_no_interventions_contributes_zero(self):
        spec = NetSpec(3, (4,), GaussianHead(2))
        batch = [record(np.ones(3), np.zeros(2), None, 0, done=True)]
        j, g, n = loss_j2(batch, spec, init_params(spec, 0))
        assert j == 0.0 and n == 0 and np.all(g == 0.0)

    def test_gradient_matches_finite_differences(self, rng):
        spec = NetSpec(4, (8, 8), GaussianHead(2))
        theta = init_params(spec, 7) * 0.3
        batch = continuous_batch(rng, 8, 4, 2)
        rep = grad_check(lambda p: loss_j2(batch, spec, p)[:2], theta, tol=1e-4)
        assert rep.passed, rep


class TestLossTotal:
    def _setup(self, rng):
        spec = NetSpec(4, (8,), GaussianHead(2))
        theta, xi = init_params(spec, 8) * 0.3, init_params(spec, 9) * 0.3
        batch = continuous_batch(rng, 8, 4, 2)
        eps = np.random.default_rng(3).standard_normal((8, 8, 2))
        return spec, theta, xi, batch, eps

    def test_lambda_zero_has_zero_xi_gradient(self, rng):
        spec, theta, xi, batch, eps = self._setup(rng)
        cfg = LossConfig(params=InterventionParams(c=0.2), lam=0.0, m_samples=8)
        _, _, g_xi = loss_total(batch, spec, theta, spec, xi, cfg, eps=eps)
        assert np.all(g_xi == 0.0)

    def test_lambda_one_equals_j1_bit_exact(self, rng):
        spec, theta, xi, batch, eps = self._setup(rng)
        cfg = LossConfig(params=InterventionParams(c=0.2), lam=1.0, m_samples=8)
        j1, _, _ = loss_j1(batch, spec, theta, spec, xi, cfg, eps=eps)
        total, _, _ = loss_total(batch, spec, theta, spec, xi, cfg, eps=eps)
        assert total == j1

    def test_linear_in_lambda(self, rng):
        spec, theta, xi, batch, eps = self._setup(rng)
        values = []
        for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
            cfg = LossConfig(params=InterventionParams(c=0.2), lam=lam, m_samples=8)
            values.append(loss_total(batch, spec, theta, spec, xi, cfg, eps=eps)[0])
        diffs = np.diff(values)
        assert np.allclose(diffs, diffs[0], atol=1e-12)


class TestLearningPhase:
    def test_full_batch_loss_non_increasing(self, rng):
        spec = NetSpec(4, (8,), CategoricalHead(3))
        batch = discrete_batch(rng, 40, 4, 3)
        dataset = Dataset(batch)
        cfg = LossConfig(
            params=InterventionParams(c=0.5), epochs=1, batch_size=64, lr=5e-3
        )
        state = TrainState.fresh(
            Policy(spec, init_params(spec, 0)), Policy(spec, init_params(spec, 1)), lr=cfg.lr
        )
        losses = [
            loss_discrete(batch, spec, state.policy_params, spec, state.mental_params, cfg)[0]
        ]
        for _ in range(30):
            learning_phase(state, dataset, cfg, seed=0)
            losses.append(
                loss_discrete(batch, spec, state.policy_params, spec, state.mental_params, cfg)[0]
            )
        for prev, nxt in zip(losses, losses[1:]):
            assert nxt <= prev + 1e-3

    def test_diverged_training_rolls_back(self):
        spec = NetSpec(3, (4,), GaussianHead(2))
        bad = [record(np.ones(3), np.zeros(2), np.array([np.nan, 0.0]), 1, done=True)]
        state = TrainState.fresh(
            Policy(spec, init_params(spec, 0)), Policy(spec, init_params(spec, 1)), lr=1e-3
        )
        before = state.policy_params.copy()
        cfg = LossConfig(params=InterventionParams(c=0.0), epochs=1)
        with pytest.raises(TrainingDivergedError):
            learning_phase(state, Dataset(bad), cfg, seed=0)
        assert np.array_equal(state.policy_params, before)


class TestRunMile:
    def test_zero_iterations_returns_initial(self, grid_pipeline):
        cfg = LossConfig(params=grid_pipeline.human.params, epochs=1)
        state, metrics = run_mile(
            grid_pipeline.env, grid_pipeline.initial_policy, grid_pipeline.human,
            grid_pipeline.mental_model, cfg, n_iterations=0, k_episodes=1, seed=0,
        )
        assert metrics == []
        assert np.array_equal(state.policy_params, grid_pipeline.initial_policy.params)

    def test_dataset_aggregates_across_iterations(self, grid_pipeline, tmp_path):
        from mile_lab.datastore import EpisodeStore

        store = EpisodeStore(tmp_path / "run")
        cfg = LossConfig(params=grid_pipeline.human.params, epochs=2, lr=1e-4)
        run_mile(
            grid_pipeline.env, grid_pipeline.initial_policy, grid_pipeline.human,
            grid_pipeline.mental_model, cfg, n_iterations=3, k_episodes=2, seed=0,
            store=store, eval_episodes=10,
        )
        n0 = len(store.load_dataset(max_iter=0))
        n1 = len(store.load_dataset(max_iter=1))
        n2 = len(store.load_dataset(max_iter=2))
        assert 0 < n0 < n1 < n2

    def test_improves_over_initial_policy(self, grid_pipeline):
        from mile_lab.rollout import success_rate

        cfg = LossConfig(params=grid_pipeline.human.params, epochs=60, lr=5e-4)
        state, metrics = run_mile(
            grid_pipeline.env, grid_pipeline.initial_policy, grid_pipeline.human,
            grid_pipeline.mental_model, cfg, n_iterations=1, k_episodes=10, seed=0,
            eval_episodes=100,
        )
        init = success_rate(grid_pipeline.env, grid_pipeline.initial_policy.act, 100, 12345)
        assert metrics[-1].success_rate > init

    def test_predict_nu_in_unit_interval(self, grid_pipeline):
        cfg = LossConfig(params=grid_pipeline.human.params, epochs=2, lr=1e-4)
        state, _ = run_mile(
            grid_pipeline.env, grid_pipeline.initial_policy, grid_pipeline.human,
            grid_pipeline.mental_model, cfg, n_iterations=1, k_episodes=2, seed=0,
            eval_episodes=5,
        )
        obs = np.array([grid_pipeline.env.reset(s) for s in range(8)])
        p = predict_nu(state, obs, cfg)
        assert np.all((p >= 0) & (p <= 1))
