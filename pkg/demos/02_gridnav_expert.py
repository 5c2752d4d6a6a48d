#!/usr/bin/env python3
"""Solve the gridworld exactly and inspect the Boltzmann expert.

Value iteration gives the true Q-function, which makes the simulated human's
action distribution exact rather than approximated by RL training.
"""

import numpy as np

from mile_lab.envs import GridNavEnv, GridNavSpec, value_iteration
from mile_lab.envs.gridnav import ACTIONS
from mile_lab.intervention import boltzmann_policy
from mile_lab.rollout import success_rate

spec = GridNavSpec.default()
print(spec.to_ascii())

q_table = value_iteration(spec)
print(f"\nBellman residual: {q_table.residual():.2e}")

# Greedy arrows over the map
ARROWS = {"up": "^", "down": "v", "left": "<", "right": ">", "stay": "o"}
rows = []
for r in range(spec.height):
    row = []
    for c in range(spec.width):
        cell = (r, c)
        if cell in spec.walls:
            row.append("#")
        elif cell in spec.hazards:
            row.append("H")
        elif cell == spec.goal:
            row.append("G")
        else:
            row.append(ARROWS[ACTIONS[q_table.greedy(spec.index(cell))]])
    rows.append(" ".join(row))
print("\ngreedy policy:")
print("\n".join(rows))

# The Boltzmann expert at low temperature is a noisy-but-competent teacher.
env = GridNavEnv(spec)
for tau in (0.02, 0.1, 1.0):
    def act(obs, rng, tau=tau):
        probs = boltzmann_policy(q_table.q[env.cell_index_from_obs(obs)], tau)
        return int(rng.choice(len(probs), p=probs))

    print(f"Boltzmann(Q*/{tau}) success over 200 episodes:",
          success_rate(env, act, 200, seed=0))
