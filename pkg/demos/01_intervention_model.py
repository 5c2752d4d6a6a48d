#!/usr/bin/env python3
"""A walking tour of the probit intervention model.

The expert holds a distribution pi_h over actions and a belief pi_hat about
what the robot will do. The chance they grab the controls at a state is a
mixture of probit gates, one per action they might take, each comparing that
action's log-probability advantage against an effort cost c.
"""

import numpy as np
from scipy.special import ndtr

from mile_lab.intervention import (
    InterventionParams,
    boltzmann_policy,
    intervene_prob_discrete,
    joint_action_distribution,
    q_form_intervene_prob,
)

rng = np.random.default_rng(0)

# A state with 4 actions. The expert is Boltzmann-rational on the true
# Q-values; action 2 is clearly best.
q = np.array([0.1, -0.4, 1.3, 0.2])
pi_h = boltzmann_policy(q)
print("expert policy:", pi_h.round(3))

# Case 1: the expert believes the robot will do the right thing.
trusting = np.array([0.02, 0.02, 0.94, 0.02])
# Case 2: the expert believes the robot is about to do the worst thing.
alarmed = np.array([0.02, 0.94, 0.02, 0.02])

params = InterventionParams(c=0.5, sigma=1.0)
p_trust = intervene_prob_discrete(pi_h, trusting, params).p_intervene
p_alarm = intervene_prob_discrete(pi_h, alarmed, params).p_intervene
print(f"p(intervene | robot believed good) = {p_trust:.3f}")
print(f"p(intervene | robot believed bad)  = {p_alarm:.3f}")
assert p_alarm > p_trust

# The effort cost c shifts the whole curve: costly interventions are rare.
for c in (0.0, 1.0, 3.0):
    p = intervene_prob_discrete(pi_h, alarmed, InterventionParams(c=c)).p_intervene
    print(f"  c={c:>4.1f} -> p(intervene) = {p:.4f}")

# The same probability can be computed straight from Q-values: softmax log
# ratios equal Q differences, so the Q-form and the policy-form agree.
p_q = q_form_intervene_prob(q, alarmed, params)
print(f"Q-form / policy-form agreement: {abs(p_q - p_alarm):.2e}")

# For learning, the model predicts a distribution over |A|+1 classes: which
# action the human would intervene with, or no intervention at all.
dist = joint_action_distribution(pi_h, alarmed, params)
print("per-action intervention probs:", dist[:-1].round(3))
print("no-intervention mass:         ", round(dist[-1], 3), "| total:", dist.sum())

# A uniform expert with zero effort cost intervenes with probability 1/2
# regardless of the belief: every log-ratio vanishes and Phi(0) = 0.5.
uniform = np.full(4, 0.25)
p_half = intervene_prob_discrete(uniform, trusting, InterventionParams(c=0.0)).p_intervene
print(f"uniform expert, c=0: p = {p_half} (Phi(0) = {ndtr(0.0)})")
