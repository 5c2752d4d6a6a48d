"""Realtime session state machine: episodes, takeover, recording, training.

The session is a synchronous object; the server drives ``tick()`` on a timer
and feeds client messages through ``handle_message()``. Control ownership
changes requested by messages apply at the next tick boundary, and recorded
``nu`` always reflects ownership at execution time. The policy's sampled
action for the upcoming tick is never exposed in outgoing frames.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..datastore import EpisodeStore, TransitionRecord
from ..diffnet import Policy
from ..envs import GridNavEnv, ReachGap2DEnv
from ..envs.gridnav import ACTIONS
from ..learning import LossConfig, TrainState, learning_phase
from ..rollout import success_rate
from ..seeding import rng_for


class Phase(str, Enum):
    IDLE = "idle"
    RUNNING = "running"
    TRAINING = "training"


class SessionError(RuntimeError):
    pass


def params_hash(params: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(params, dtype="<f8").tobytes()).hexdigest()[:16]


@dataclass
class LiveSession:
    env: object
    state: TrainState
    loss_cfg: LossConfig
    store: EpisodeStore
    seed: int
    hold_policy: str = "repeat"
    stats_eval_episodes: int = 20

    phase: Phase = Phase.IDLE
    control_owner: str = "robot"
    pending_owner: str | None = None
    pending_action: object | None = None
    episode_index: int = 0  # global episode counter
    round_index: int = 0  # completed training rounds
    t: int = 0
    episodes_since_training: int = 0
    _records: list = field(default_factory=list)
    _obs: np.ndarray | None = None
    _ep_in_round: int = 0

    def __post_init__(self):
        if self.hold_policy not in ("repeat", "zero"):
            raise ValueError("hold_policy must be 'repeat' or 'zero'")

    # -- message handling ------------------------------------------------------

    def handle_message(self, msg: dict) -> dict:
        """Apply one client message; returns the immediate reply frame."""
        if not isinstance(msg, dict) or "type" not in msg:
            return {"type": "error", "msg": "message must be an object with a 'type'"}
        kind = msg["type"]
        if kind == "start_episode":
            return self._start_episode()
        if kind == "intervene":
            if self.phase is not Phase.RUNNING:
                return {"type": "error", "msg": "no running episode"}
            on = msg.get("on")
            if not isinstance(on, bool):
                return {"type": "error", "msg": "intervene needs boolean 'on'"}
            self.pending_owner = "human" if on else "robot"
            return {"type": "ack", "event": "intervene", "on": on}
        if kind == "action":
            return self._queue_action(msg)
        if kind == "train":
            if self.phase is not Phase.IDLE:
                return {"type": "error", "msg": f"cannot train while {self.phase.value}"}
            if self.episodes_since_training < 1:
                return {"type": "error", "msg": "no recorded episodes since last training round"}
            iterations = msg.get("iterations", 1)
            if not isinstance(iterations, int) or iterations < 1:
                return {"type": "error", "msg": "train needs a positive integer 'iterations'"}
            return {"type": "ack", "event": "train", "iterations": iterations}
        if kind == "stats":
            return self.stats()
        return {"type": "error", "msg": f"unknown message type {kind!r}"}

    def _start_episode(self) -> dict:
        if self.phase is not Phase.IDLE:
            return {"type": "error", "msg": f"cannot start episode while {self.phase.value}"}
        rng = rng_for(self.seed, "live-episode", self.episode_index)
        self._episode_rng = rng
        self._obs = self.env.reset(rng)
        self.t = 0
        self.phase = Phase.RUNNING
        self.control_owner = "robot"
        self.pending_owner = None
        self.pending_action = None
        self._records = []
        return {"type": "ack", "event": "episode_started", "episode": self.episode_index}

    def _queue_action(self, msg: dict) -> dict:
        if self.phase is not Phase.RUNNING:
            return {"type": "error", "msg": "no running episode"}
        owner_next = self.pending_owner or self.control_owner
        if owner_next != "human":
            return {"type": "notice", "msg": "action ignored: robot has control"}
        if isinstance(self.env, GridNavEnv):
            key = msg.get("key")
            if key not in ACTIONS:
                return {"type": "error", "msg": f"action key must be one of {ACTIONS}"}
            self.pending_action = ACTIONS.index(key)
        else:
            vec = msg.get("a")
            if (
                not isinstance(vec, (list, tuple))
                or len(vec) != 2
                or not all(isinstance(v, (int, float)) for v in vec)
            ):
                return {"type": "error", "msg": "action needs 'a': [dx, dy]"}
            self.pending_action = np.asarray(vec, dtype=np.float64)
        return {"type": "ack", "event": "action"}

    # -- ticking ----------------------------------------------------------------

    def tick(self) -> dict:
        """Advance one control step; returns the frame to broadcast."""
        if self.phase is not Phase.RUNNING:
            raise SessionError("tick() outside a running episode")
        if self.pending_owner is not None:
            if self.pending_owner != self.control_owner:
                self.control_owner = self.pending_owner
                if self.control_owner == "robot":
                    self.pending_action = None
                elif self.hold_policy == "zero" and self.pending_action is None:
                    self.pending_action = self._zero_action()
            self.pending_owner = None

        a_r = self.state.policy.act(self._obs, self._episode_rng)
        human_action = None
        if self.control_owner == "human":
            if self.pending_action is not None:
                human_action = self.pending_action
                if self.hold_policy == "zero":
                    self.pending_action = None  # consumed; absent input means zero
            elif self.hold_policy == "zero":
                human_action = self._zero_action()
        if human_action is not None:
            nu, executed, a_h = 1, human_action, human_action
        else:
            nu, executed, a_h = 0, a_r, None

        step = self.env.step(executed)
        self._records.append(
            TransitionRecord(
                ep=self._ep_in_round, t=self.t, obs=self._obs, a_r=a_r, a_h=a_h, nu=nu,
                next_obs=step.obs, reward=step.reward, done=step.done,
                success=step.success, iter=self.round_index, source="live",
            )
        )
        self._obs = step.obs
        self.t += 1
        frame = self.frame(done=step.done, success=step.success)
        if step.done:
            self.store.append_episode(self._records)
            self._records = []
            self.phase = Phase.IDLE
            self.episode_index += 1
            self._ep_in_round += 1
            self.episodes_since_training += 1
        return frame

    def _zero_action(self):
        if isinstance(self.env, GridNavEnv):
            return ACTIONS.index("stay")
        return np.zeros(2)

    # -- frames -------------------------------------------------------------------

    def frame(self, done: bool = False, success: bool = False) -> dict:
        return {
            "type": "frame",
            "t": self.t,
            "episode": self.episode_index,
            "owner": self.control_owner,
            "done": bool(done),
            "success": bool(success),
            "state": self._state_payload(),
        }

    def _state_payload(self) -> dict:
        if isinstance(self.env, GridNavEnv):
            spec = self.env.spec
            return {
                "kind": "gridnav",
                "cell": list(self.env.cell),
                "goal": list(spec.goal),
                "walls": sorted(list(w) for w in spec.walls),
                "hazards": sorted(list(h) for h in spec.hazards),
                "width": spec.width,
                "height": spec.height,
            }
        spec = self.env.spec
        return {
            "kind": "reachgap",
            "pos": [float(x) for x in self.env.pos],
            "goal": list(spec.goal),
            "wall_y": spec.wall_y,
            "gap_x": spec.gap_x,
            "gap_half_width": spec.gap_half_width,
            "success_radius": spec.success_radius,
        }

    # -- training and stats ----------------------------------------------------------

    def train_round(self, iterations: int = 1, on_epoch=None) -> dict:
        """Run LEARNING on all live data collected so far; swaps the policy on success."""
        if self.phase is not Phase.IDLE:
            raise SessionError(f"cannot train while {self.phase.value}")
        if self.episodes_since_training < 1:
            raise SessionError("no recorded episodes since last training round")
        self.phase = Phase.TRAINING
        try:
            dataset = self.store.load_dataset(source="live")
            for _ in range(iterations):
                loss = learning_phase(
                    self.state, dataset, self.loss_cfg, seed=self.seed,
                    iteration=self.round_index, on_epoch=on_epoch,
                )
                self.round_index += 1
            self.episodes_since_training = 0
            self._ep_in_round = 0
            return {
                "type": "ack",
                "event": "train_done",
                "loss": loss,
                "iteration": self.round_index,
                "checkpoint_hash": params_hash(self.state.policy_params),
            }
        finally:
            self.phase = Phase.IDLE

    def stats(self) -> dict:
        data = self.store.load_dataset(source="live")
        rate = success_rate(
            self.env.__class__(self.env.spec),
            self.state.policy.act,
            self.stats_eval_episodes,
            int(rng_for(self.seed, "stats-eval", self.round_index).integers(2**31)),
        )
        return {
            "type": "stats",
            "success_rate": rate,
            "intervention_rate": data.intervention_rate,
            "iteration": self.round_index,
            "episodes": self.episode_index,
        }


def replay_live_training(
    policy0: Policy,
    mental0: Policy,
    store: EpisodeStore,
    loss_cfg: LossConfig,
    seed: int,
    rounds: int,
) -> TrainState:
    """Offline replication of a live session's training rounds.

    Round r trains on the records available when the live session ran it
    (those with iter <= r); with the same seeds and round indices this
    reproduces the live session's final parameters exactly.
    """
    state = TrainState.fresh(policy0, mental0, loss_cfg.lr)
    for r in range(rounds):
        dataset = store.load_dataset(max_iter=r, source="live")
        learning_phase(state, dataset, loss_cfg, seed=seed, iteration=r)
    return state
