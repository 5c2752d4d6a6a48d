"""The probit intervention model.

An overseeing expert with action distribution pi_h and a mental model pi_hat
of the robot intervenes at a state with probability

    p(nu=1 | s) = sum_a pi_h(a|s) * Phi((Delta(a) - c) / sigma),
    Delta(a)    = E_{a' ~ pi_hat}[ln pi_h(a|s) - ln pi_h(a'|s)],

where Phi is the standard normal CDF, c the effort cost of intervening, and
sigma the CDF scale. When pi_h is a Boltzmann policy over Q-values the log
ratios equal Q differences, so the same probability can be computed either
from Q or from the policy alone; both forms are provided and must agree.

The continuous-action counterpart replaces the per-action sum with an
expectation over reparameterized samples from a gaussian pi_h, with the inner
expectation available in closed form (gaussian cross log-density).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class InterventionParams:
    """Probit gate parameters: effort cost c and CDF scale sigma."""

    c: float
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass
class InterventionEstimate:
    """Intervention probability plus the pieces needed to sample or backprop.

    Discrete estimates carry the per-action joint probabilities
    p(a_h=a, nu=1 | s); continuous Monte-Carlo estimates carry per-sample gate
    values and log-densities.
    """

    p_intervene: float
    kind: str  # "closed_form" | "monte_carlo"
    joint_probs: np.ndarray | None = None
    sample_gates: np.ndarray | None = field(default=None, repr=False)
    sample_log_density: np.ndarray | None = field(default=None, repr=False)
    m_samples: int | None = None
    floored: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p_intervene <= 1.0 + 1e-12:
            raise ValueError(f"p_intervene out of [0,1]: {self.p_intervene}")


class CalibrationError(RuntimeError):
    """Raised when no effort cost attains the target intervention rate."""

    def __init__(self, message: str, trace: list[tuple[float, float]]):
        lines = "\n".join(f"  c={c:+.4f} -> rate={r:.4f}" for c, r in trace)
        super().__init__(f"{message}\nrate-vs-c trace:\n{lines}")
        self.trace = trace


def probit_gate(delta, params: InterventionParams):
    """Phi((delta - c) / sigma); strictly increasing in delta."""
    return ndtr((np.asarray(delta, dtype=np.float64) - params.c) / params.sigma)


def boltzmann_policy(q_values, temperature: float = 1.0) -> np.ndarray:
    """Softmax of Q-values at the given temperature (shift invariant)."""
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    q = np.asarray(q_values, dtype=np.float64) / temperature
    if not np.all(np.isfinite(q)):
        raise ValueError("q values must be finite")
    z = q - q.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _validated_dist(p, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise ValueError(f"{name} must be a 1-D distribution over >= 2 actions")
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError(f"{name} is not a probability distribution (sum={p.sum()})")
    return np.clip(p, 0.0, None)


def _log_advantages(pi_h: np.ndarray, pi_hat: np.ndarray) -> tuple[np.ndarray, bool]:
    floored = bool(np.any(pi_h < LOG_FLOOR))
    logp = np.log(np.maximum(pi_h, LOG_FLOOR))
    return logp - float(pi_hat @ logp), floored


def intervene_prob_discrete(
    pi_h, pi_hat, params: InterventionParams
) -> InterventionEstimate:
    """Closed-form p(nu=1|s) for categorical pi_h and pi_hat over the same actions."""
    pi_h = _validated_dist(pi_h, "pi_h")
    pi_hat = _validated_dist(pi_hat, "pi_hat")
    if pi_h.shape != pi_hat.shape:
        raise ValueError("pi_h and pi_hat must share an action space")
    delta, floored = _log_advantages(pi_h, pi_hat)
    joint = pi_h * probit_gate(delta, params)
    return InterventionEstimate(
        p_intervene=float(min(joint.sum(), 1.0)),
        kind="closed_form",
        joint_probs=joint,
        floored=floored,
    )


def q_form_intervene_prob(q_values, pi_hat, params: InterventionParams) -> float:
    """p(nu=1|s) computed directly from Q-values: gate on Q(s,a) - E_pihat[Q]."""
    q = np.asarray(q_values, dtype=np.float64)
    pi_hat = _validated_dist(pi_hat, "pi_hat")
    delta = q - float(pi_hat @ q)
    return float(np.sum(boltzmann_policy(q) * probit_gate(delta, params)))


def joint_action_distribution(
    pi_h, pi_hat, params: InterventionParams
) -> np.ndarray:
    """Distribution over |A|+1 classes: per-action intervention probs plus no-intervention.

    Class a holds pi_h(a) * Phi((Delta(a) - c)/sigma); the final class is the
    complement, so the vector is a valid distribution by construction.
    """
    est = intervene_prob_discrete(pi_h, pi_hat, params)
    no_intervention = max(1.0 - float(est.joint_probs.sum()), 0.0)
    return np.concatenate([est.joint_probs, [no_intervention]])


def gaussian_log_density(a, mean, var) -> np.ndarray:
    """ln N(a; mean, diag(var)), summed over the last axis."""
    a, mean, var = (np.asarray(x, dtype=np.float64) for x in (a, mean, var))
    return -0.5 * np.sum(np.log(2.0 * np.pi * var) + (a - mean) ** 2 / var, axis=-1)


def gaussian_cross_log_density(mean_q, var_q, mean_p, var_p) -> float:
    """E_{a ~ N(mean_q, var_q)}[ln N(a; mean_p, var_p)] in closed form."""
    mean_q, var_q, mean_p, var_p = (
        np.asarray(x, dtype=np.float64) for x in (mean_q, var_q, mean_p, var_p)
    )
    return float(
        -0.5
        * np.sum(np.log(2.0 * np.pi * var_p) + (var_q + (mean_q - mean_p) ** 2) / var_p)
    )


def intervene_prob_continuous(
    mean_h,
    var_h,
    mean_hat,
    var_hat,
    params: InterventionParams,
    m_samples: int,
    rng: np.random.Generator | None = None,
    eps: np.ndarray | None = None,
) -> InterventionEstimate:
    """Monte-Carlo p(nu=1|s) for gaussian pi_h (mean_h, var_h) and mental model pi_hat.

    The inner expectation E_{a' ~ pi_hat}[ln pi_h(a')] is exact (gaussian cross
    log-density); the outer expectation uses ``m_samples`` reparameterized
    draws a = mean + sqrt(var) * eps. Pass ``eps`` for common random numbers.
    """
    if m_samples < 1:
        raise ValueError("m_samples must be >= 1")
    mean_h = np.asarray(mean_h, dtype=np.float64)
    var_h = np.asarray(var_h, dtype=np.float64)
    if np.any(var_h <= 0) or np.any(np.asarray(var_hat) <= 0):
        raise ValueError("gaussian variances must be positive")
    if eps is None:
        if rng is None:
            raise ValueError("provide either rng or eps")
        eps = rng.standard_normal((m_samples, mean_h.size))
    elif eps.shape != (m_samples, mean_h.size):
        raise ValueError(f"eps must have shape ({m_samples}, {mean_h.size})")
    a = mean_h + np.sqrt(var_h) * eps
    logp = gaussian_log_density(a, mean_h, var_h)
    cross = gaussian_cross_log_density(mean_hat, var_hat, mean_h, var_h)
    gates = probit_gate(logp - cross, params)
    return InterventionEstimate(
        p_intervene=float(gates.mean()),
        kind="monte_carlo",
        sample_gates=gates,
        sample_log_density=logp,
        m_samples=m_samples,
    )


def calibrate_c(
    env,
    policy,
    human,
    target_rate: float = 0.25,
    tol: float = 0.05,
    seed: int = 0,
    n_episodes: int = 10,
    c_lo: float = -50.0,
    c_hi: float = 500.0,
    max_iters: int = 60,
) -> tuple[float, float]:
    """Bisect the effort cost c until the deployment intervention rate hits the target.

    Rollouts use common random numbers (the same seed for every candidate c),
    so the empirical rate is monotone non-increasing in c up to trajectory
    divergence. Returns (c, achieved_rate); raises CalibrationError with the
    rate-vs-c trace when the target band is unreachable in [c_lo, c_hi].
    """
    from .sim_human import run_deployment  # deferred: sim_human builds on this module

    if not 0.0 < target_rate < 1.0:
        raise ValueError("target_rate must lie in (0, 1)")

    trace: list[tuple[float, float]] = []

    def rate_at(c: float) -> float:
        h = human.with_params(InterventionParams(c=c, sigma=human.params.sigma))
        episodes = run_deployment(env, policy, h, n_episodes, seed)
        steps = sum(len(ep) for ep in episodes)
        hits = sum(rec.nu for ep in episodes for rec in ep)
        r = hits / steps
        trace.append((c, r))
        return r

    lo_band, hi_band = target_rate - tol, target_rate + tol
    r_lo = rate_at(c_lo)
    if lo_band <= r_lo <= hi_band:
        return c_lo, r_lo
    r_hi = rate_at(c_hi)
    if lo_band <= r_hi <= hi_band:
        return c_hi, r_hi
    if r_lo < lo_band or r_hi > hi_band:
        raise CalibrationError(
            f"target rate {target_rate}+/-{tol} unreachable for c in "
            f"[{c_lo}, {c_hi}] (achievable range [{r_hi:.4f}, {r_lo:.4f}])",
            trace,
        )
    lo, hi = c_lo, c_hi
    for _ in range(max_iters):
        mid = 0.5 * (lo + hi)
        r = rate_at(mid)
        if lo_band <= r <= hi_band:
            return mid, r
        if r > target_rate:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(
        f"bisection did not enter the band {target_rate}+/-{tol} within {max_iters} steps",
        trace,
    )
