#!/usr/bin/env python3
"""Iterative deploy-then-learn on the continuous reach-through-gap task.

One episode per round, twenty rounds. The success curve climbs toward the
noisy expert within a handful of iterations. Expect several minutes.
"""

import numpy as np

from mile_lab.envs import ReachGap2DEnv, scripted_expert
from mile_lab.harness import ExperimentConfig, build_pipeline
from mile_lab.harness.runner import loss_config
from mile_lab.learning import run_mile
from mile_lab.rollout import success_rate

cfg = ExperimentConfig.from_toml("exp/reachgap_iterative.toml")
seed = 0

pipeline = build_pipeline(cfg, seed)
print(f"initial policy success: {pipeline.initial_success:.2f}")

spec = pipeline.env.spec


def expert_act(obs, rng):
    mean, var = scripted_expert(spec, obs[:2], 0.005)
    return mean + np.sqrt(var) * rng.standard_normal(2)


expert_level = success_rate(ReachGap2DEnv(spec), expert_act, 200, seed=31337)
print(f"noisy expert success: {expert_level:.2f}")

lcfg = loss_config(cfg, pipeline.human)
state, metrics = run_mile(
    pipeline.env, pipeline.initial_policy, pipeline.human, pipeline.mental_model,
    lcfg, n_iterations=cfg.iterations, k_episodes=1, seed=seed, eval_episodes=200,
)
print("\niter  episodes  interventions  success")
for m in metrics:
    bar = "#" * int(m.success_rate * 30)
    print(f"{m.iteration:4d}  {m.episodes:8d}  {m.interventions:13d}  {m.success_rate:.2f} {bar}")
