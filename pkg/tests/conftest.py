import numpy as np
import pytest

from mile_lab.bc import BCConfig
from mile_lab.envs import (
    GridNavEnv,
    GridNavSpec,
    InitialPolicyConfig,
    ReachGap2DEnv,
    ReachGap2DSpec,
    make_initial_policy,
    value_iteration,
)
from mile_lab.intervention import InterventionParams, calibrate_c
from mile_lab.sim_human import SimulatedHuman, fit_mental_model

SMALL_MAP = """
. . . H .
. # . . .
. . # . .
. # . . .
. . . . G
"""

GRID_TEMPERATURE = 0.02


class GridPipeline:
    def __init__(self):
        self.spec = GridNavSpec.from_ascii(SMALL_MAP, horizon=40)
        self.env = GridNavEnv(self.spec)
        self.q_table = value_iteration(self.spec)
        self.initial_policy = make_initial_policy(
            self.env, corruption=0.25, seed=0, q_table=self.q_table,
            cfg=InitialPolicyConfig(
                n_teacher_episodes=80, band=None, eval_episodes=100,
                bc=BCConfig(epochs=40, batch_size=64, lr=1e-3),
            ),
        )
        self.mental_model, self.mental_holdout = fit_mental_model(
            self.initial_policy, self.env, n_rollouts=60, seed=0,
            bc_cfg=BCConfig(epochs=40, batch_size=64, lr=1e-3, holdout_frac=0.1),
        )
        base = SimulatedHuman(
            mental_model=self.mental_model,
            params=InterventionParams(c=1.0, sigma=1.0),
            q_table=self.q_table,
            temperature=GRID_TEMPERATURE,
        )
        self.calibrated_c, self.calibrated_rate = calibrate_c(
            self.env, self.initial_policy, base, target_rate=0.25, tol=0.05, seed=11
        )
        self.human = base.with_params(InterventionParams(c=self.calibrated_c, sigma=1.0))


class ReachPipeline:
    def __init__(self):
        self.spec = ReachGap2DSpec(horizon=120)
        self.env = ReachGap2DEnv(self.spec)
        self.initial_policy = make_initial_policy(
            self.env, corruption=0.3, seed=0,
            cfg=InitialPolicyConfig(
                n_teacher_episodes=80, band=None, eval_episodes=100,
                bc=BCConfig(epochs=40, batch_size=64, lr=1e-3),
            ),
        )
        self.mental_model, _ = fit_mental_model(
            self.initial_policy, self.env, n_rollouts=60, seed=0,
            bc_cfg=BCConfig(epochs=40, batch_size=64, lr=1e-3, holdout_frac=0.1),
        )
        base = SimulatedHuman(
            mental_model=self.mental_model,
            params=InterventionParams(c=0.0, sigma=20.0),
            env_spec=self.spec,
        )
        self.calibrated_c, self.calibrated_rate = calibrate_c(
            self.env, self.initial_policy, base, target_rate=0.25, tol=0.05, seed=11
        )
        self.human = base.with_params(InterventionParams(c=self.calibrated_c, sigma=20.0))


@pytest.fixture(scope="session")
def grid_pipeline():
    return GridPipeline()


@pytest.fixture(scope="session")
def reach_pipeline():
    return ReachPipeline()


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
