import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr

from mile_lab.intervention import (
    InterventionParams,
    boltzmann_policy,
    gaussian_cross_log_density,
    gaussian_log_density,
    intervene_prob_continuous,
    intervene_prob_discrete,
    joint_action_distribution,
    probit_gate,
    q_form_intervene_prob,
)

from oracles import mc_continuous_oracle, mc_discrete_oracle, random_discrete_instance


class TestProbitGate:
    def test_at_cost_is_half(self):
        for sigma in (0.1, 1.0, 25.0):
            assert probit_gate(2.0, InterventionParams(c=2.0, sigma=sigma)) == pytest.approx(0.5)

    def test_quantile(self):
        p = probit_gate(1.0 + 1.96 * 0.7, InterventionParams(c=1.0, sigma=0.7))
        assert p == pytest.approx(0.975, abs=1e-3)

    def test_saturates_to_zero(self):
        assert probit_gate(-1e6, InterventionParams(c=0.0, sigma=1.0)) == 0.0

    @given(st.floats(-20, 20), st.floats(-20, 20))
    @settings(max_examples=50, deadline=None)
    def test_monotone_in_delta(self, d1, d2):
        params = InterventionParams(c=0.3, sigma=1.3)
        lo, hi = sorted((d1, d2))
        assert probit_gate(lo, params) <= probit_gate(hi, params)

    def test_sigma_must_be_positive(self):
        with pytest.raises(ValueError):
            InterventionParams(c=0.0, sigma=0.0)


class TestBoltzmann:
    def test_uniform_for_constant_q(self):
        assert np.allclose(boltzmann_policy([0.0, 0.0, 0.0]), 1.0 / 3.0)

    def test_shift_invariance(self):
        q = np.array([0.4, -1.0, 2.2])
        assert np.allclose(boltzmann_policy(q), boltzmann_policy(q + 5.0), atol=1e-12)

    def test_known_ratios(self):
        p = boltzmann_policy([1.0, 0.0, -1.0])
        expected = np.array([math.e, 1.0, 1.0 / math.e])
        assert np.allclose(p, expected / expected.sum(), atol=1e-12)

    def test_low_temperature_matches_greedy(self):
        q = np.array([0.3, 0.9, 0.9, -2.0])
        p = boltzmann_policy(q, temperature=1e-9)
        assert int(np.argmax(p)) == int(np.argmax(q))


class TestDiscreteProbability:
    def test_uniform_pi_h_zero_cost(self):
        pi_h = np.full(4, 0.25)
        pi_hat = np.array([0.7, 0.1, 0.1, 0.1])
        est = intervene_prob_discrete(pi_h, pi_hat, InterventionParams(c=0.0, sigma=1.0))
        assert est.p_intervene == pytest.approx(0.5, abs=1e-12)

    def test_uniform_pi_h_costly(self):
        pi_h = np.full(3, 1.0 / 3.0)
        est = intervene_prob_discrete(pi_h, pi_h, InterventionParams(c=3.0, sigma=1.0))
        assert est.p_intervene == pytest.approx(float(ndtr(-3.0)), rel=1e-9)

    def test_against_mc_oracle(self):
        pi_h = boltzmann_policy([1.0, 0.0, -1.0])
        pi_hat = np.array([0.1, 0.2, 0.7])
        params = InterventionParams(c=0.5, sigma=1.0)
        est = intervene_prob_discrete(pi_h, pi_hat, params)
        p_mc, se = mc_discrete_oracle(pi_h, pi_hat, params, n_samples=1_000_000, seed=7)
        assert abs(est.p_intervene - p_mc) < 3.0 * se

    def test_zero_entries_are_floored_and_flagged(self):
        pi_h = np.array([0.5, 0.5, 0.0])
        est = intervene_prob_discrete(pi_h, np.full(3, 1 / 3), InterventionParams(c=0.0))
        assert est.floored
        assert np.isfinite(est.p_intervene)

    def test_rejects_mismatched_support(self):
        with pytest.raises(ValueError):
            intervene_prob_discrete(np.full(3, 1 / 3), np.full(4, 0.25), InterventionParams(c=0.0))


class TestQFormIdentity:
    def test_random_instances_agree(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(2, 9))
            q, pi_h, pi_hat, params = random_discrete_instance(rng, n)
            a = q_form_intervene_prob(q, pi_hat, params)
            b = intervene_prob_discrete(boltzmann_policy(q), pi_hat, params).p_intervene
            assert abs(a - b) < 1e-10

    def test_constant_q_reduces_to_gate_at_zero(self):
        params = InterventionParams(c=1.2, sigma=0.8)
        p = q_form_intervene_prob(np.full(5, 3.3), np.full(5, 0.2), params)
        assert p == pytest.approx(float(ndtr(-1.2 / 0.8)), rel=1e-9)

    def test_greedy_mental_model_hand_case(self):
        q = np.array([10.0, -10.0])
        pi_hat = np.array([1.0, 0.0])
        params = InterventionParams(c=0.0, sigma=1.0)
        pi_h = boltzmann_policy(q)
        # gate argument for action 0 is exactly zero -> contributes pi_h(0)/2
        expected = 0.5 * pi_h[0] + pi_h[1] * float(ndtr(-20.0))
        assert q_form_intervene_prob(q, pi_hat, params) == pytest.approx(expected, rel=1e-12)


class TestJointDistribution:
    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=100, deadline=None)
    def test_valid_distribution(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 9))
        _, pi_h, pi_hat, params = random_discrete_instance(rng, n)
        dist = joint_action_distribution(pi_h, pi_hat, params)
        assert dist.shape == (n + 1,)
        assert np.all(dist >= 0.0)
        assert abs(dist.sum() - 1.0) < 1e-9

    def test_infinite_cost_gives_no_intervention(self):
        pi_h = np.array([0.6, 0.3, 0.1])
        dist = joint_action_distribution(pi_h, pi_h, InterventionParams(c=1e6, sigma=1.0))
        assert dist[-1] == pytest.approx(1.0, abs=1e-12)

    def test_consistent_with_probability(self):
        pi_h = boltzmann_policy([1.0, 0.0, -1.0])
        pi_hat = np.array([0.1, 0.2, 0.7])
        params = InterventionParams(c=0.5, sigma=1.0)
        dist = joint_action_distribution(pi_h, pi_hat, params)
        est = intervene_prob_discrete(pi_h, pi_hat, params)
        assert dist[-1] == pytest.approx(1.0 - est.p_intervene, abs=1e-12)
        assert np.allclose(dist[:-1], est.joint_probs)


class TestContinuousEstimator:
    def test_identical_gaussians_at_mean(self):
        # sample at the mean of a unit 2-D gaussian: Delta = 1 exactly
        params = InterventionParams(c=0.25, sigma=1.5)
        est = intervene_prob_continuous(
            np.zeros(2), np.ones(2), np.zeros(2), np.ones(2),
            params, m_samples=1, eps=np.zeros((1, 2)),
        )
        assert est.p_intervene == pytest.approx(float(ndtr((1.0 - 0.25) / 1.5)), rel=1e-12)

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(3)
        mean_h, var_h = rng.normal(size=2), np.array([0.3, 0.8])
        mean_hat, var_hat = rng.normal(size=2), np.array([0.5, 0.4])
        params = InterventionParams(c=0.5, sigma=1.0)
        est = intervene_prob_continuous(
            mean_h, var_h, mean_hat, var_hat, params, m_samples=100_000,
            rng=np.random.default_rng(11),
        )
        p_mc, se_mc = mc_continuous_oracle(
            mean_h, var_h, mean_hat, var_hat, params, n_samples=10_000_000, seed=5
        )
        se_est = est.sample_gates.std(ddof=1) / math.sqrt(est.m_samples)
        assert abs(est.p_intervene - p_mc) < 3.0 * math.hypot(se_mc, se_est)

    def test_huge_sigma_flattens_to_half(self):
        est = intervene_prob_continuous(
            np.zeros(2), np.ones(2), np.ones(2), np.ones(2),
            InterventionParams(c=0.0, sigma=1e9), m_samples=64,
            rng=np.random.default_rng(0),
        )
        assert est.p_intervene == pytest.approx(0.5, abs=1e-6)

    def test_zero_samples_rejected(self):
        with pytest.raises(ValueError):
            intervene_prob_continuous(
                np.zeros(2), np.ones(2), np.zeros(2), np.ones(2),
                InterventionParams(c=0.0), m_samples=0, rng=np.random.default_rng(0),
            )

    def test_common_noise_is_deterministic(self):
        eps = np.random.default_rng(9).standard_normal((16, 2))
        args = (np.ones(2) * 0.1, np.ones(2) * 0.2, np.zeros(2), np.ones(2))
        params = InterventionParams(c=0.3, sigma=0.9)
        a = intervene_prob_continuous(*args, params, 16, eps=eps)
        b = intervene_prob_continuous(*args, params, 16, eps=eps)
        assert a.p_intervene == b.p_intervene

    def test_cross_log_density_closed_form(self):
        # identical distributions: cross log-density equals negative entropy
        var = np.array([0.5, 2.0])
        got = gaussian_cross_log_density(np.zeros(2), var, np.zeros(2), var)
        entropy = 0.5 * np.sum(np.log(2.0 * np.pi * np.e * var))
        assert got == pytest.approx(-entropy, rel=1e-12)

    def test_log_density_matches_scipy(self):
        from scipy.stats import multivariate_normal

        rng = np.random.default_rng(2)
        a, mean = rng.normal(size=3), rng.normal(size=3)
        var = rng.random(3) + 0.1
        got = gaussian_log_density(a, mean, var)
        want = multivariate_normal(mean=mean, cov=np.diag(var)).logpdf(a)
        assert got == pytest.approx(want, rel=1e-12)
