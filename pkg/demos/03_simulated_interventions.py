#!/usr/bin/env python3
"""Watch the simulated human take over a mediocre robot.

Builds the full deployment stack: an intentionally weakened initial policy,
a mental model cloned from its rollouts, a calibrated effort cost, and a
batch of recorded episodes with interventions marked.

Takes a couple of minutes (behavioral cloning runs twice).
"""

import numpy as np

from mile_lab.envs import GridNavEnv, GridNavSpec, make_initial_policy, value_iteration
from mile_lab.intervention import InterventionParams, calibrate_c
from mile_lab.rollout import success_rate
from mile_lab.sim_human import SimulatedHuman, fit_mental_model, intervention_rate, run_deployment

spec = GridNavSpec.default()
env = GridNavEnv(spec)
q_table = value_iteration(spec)

print("training the corrupted-teacher clone (initial policy)...")
initial = make_initial_policy(env, corruption=0.22, seed=0, q_table=q_table)
print("initial policy success:", success_rate(env, initial.act, 200, seed=99))

print("fitting the simulated human's mental model on 100 rollouts...")
mental, holdout_nll = fit_mental_model(initial, env, n_rollouts=100, seed=0)
print(f"mental model holdout NLL: {holdout_nll:.3f}")

human = SimulatedHuman(
    mental_model=mental,
    params=InterventionParams(c=0.0, sigma=1.0),
    q_table=q_table,
    temperature=0.02,
)
c, achieved = calibrate_c(env, initial, human, target_rate=0.25, tol=0.05, seed=7)
human = human.with_params(InterventionParams(c=c, sigma=1.0))
print(f"calibrated effort cost c = {c:.2f} (rate {achieved:.2f})")

episodes = run_deployment(env, initial, human, k_episodes=5, seed=123)
print(f"\n5 episodes, intervention ratio {intervention_rate(episodes):.2f}")
for i, ep in enumerate(episodes):
    marks = "".join("!" if r.nu else "." for r in ep)
    outcome = "success" if ep[-1].success else "failure"
    print(f"  ep{i} [{outcome:7s}] {marks}")
print("\n('!' marks timesteps where the human took over)")
