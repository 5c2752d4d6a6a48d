"""Experiment configuration: TOML files with dotted-path overrides.

Every tunable quantity of a run lives here: the environment block, the method
name, deployment round counts, gate parameters (or the calibration target),
initial-policy corruption, and the training hyperparameters.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..envs import DEFAULT_MAP, GridNavSpec, ReachGap2DSpec

METHODS = ("mile", "hg_dagger", "iwr", "sirius", "bc_interventions")
ENV_KINDS = ("gridnav", "reachgap")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""


def _get(d: dict, path: str, default):
    node = d
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def _require_type(value, types, path: str):
    if not isinstance(value, types) or isinstance(value, bool) and bool not in (
        types if isinstance(types, tuple) else (types,)
    ):
        raise ConfigError(f"{path}: expected {types}, got {value!r}")
    return value


@dataclass
class HumanConfig:
    sigma: float = 1.0
    c: float | None = None  # None: calibrate
    calibrate_target: float = 0.25
    calibrate_tol: float = 0.05
    temperature: float = 0.02
    expert_noise_std: float = 0.005
    mental_rollouts: int = 100
    sticky_steps: int = 0


@dataclass
class InitialPolicyFields:
    corruption: float = 0.22
    style: str = "diffuse"
    teacher_episodes: int = 150
    bc_epochs: int = 60
    bc_lr: float = 1e-3
    band: tuple[float, float] | None = (0.2, 0.6)


@dataclass
class TrainingFields:
    lam: float = 0.5
    m_samples: int = 16
    batch_size: int = 64
    batches_per_epoch: int | None = None
    epochs: int = 300
    lr: float = 2e-4


@dataclass
class ExperimentConfig:
    env_kind: str
    env_spec: object
    method: str
    seeds: list[int]
    iterations: int
    episodes_per_iteration: int
    eval_episodes: int = 100
    intervention_budget: int | None = None
    human: HumanConfig = field(default_factory=HumanConfig)
    initial: InitialPolicyFields = field(default_factory=InitialPolicyFields)
    training: TrainingFields = field(default_factory=TrainingFields)
    raw: dict = field(default_factory=dict, repr=False)

    @staticmethod
    def from_toml(path: str | Path, overrides: list[str] | None = None) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
        for ov in overrides or []:
            _apply_override(raw, ov)
        return ExperimentConfig.from_dict(raw)

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        env_kind = _get(raw, "env.kind", None)
        if env_kind not in ENV_KINDS:
            raise ConfigError(f"env.kind: must be one of {ENV_KINDS}, got {env_kind!r}")
        env_spec = _build_env_spec(env_kind, raw.get("env", {}))

        method = _get(raw, "method.name", "mile")
        if method not in METHODS:
            raise ConfigError(f"method.name: must be one of {METHODS}, got {method!r}")

        seeds = _get(raw, "run.seeds", None)
        if isinstance(seeds, int) and not isinstance(seeds, bool):
            seeds = [seeds]
        if not isinstance(seeds, list) or not seeds or not all(
            isinstance(s, int) and not isinstance(s, bool) for s in seeds
        ):
            raise ConfigError("run.seeds: must be a non-empty list of integers")
        iterations = _require_type(_get(raw, "run.iterations", 1), int, "run.iterations")
        k = _require_type(
            _get(raw, "run.episodes_per_iteration", 1), int, "run.episodes_per_iteration"
        )
        if iterations < 0 or k < 1:
            raise ConfigError("run.iterations must be >= 0 and run.episodes_per_iteration >= 1")
        eval_eps = _require_type(_get(raw, "run.eval_episodes", 100), int, "run.eval_episodes")
        budget = _get(raw, "run.intervention_budget", 0)
        _require_type(budget, int, "run.intervention_budget")

        human = HumanConfig(
            sigma=float(_require_type(_get(raw, "human.sigma", 1.0), (int, float), "human.sigma")),
            c=(None if _get(raw, "human.c", "calibrate") == "calibrate"
               else float(_require_type(_get(raw, "human.c", 0.0), (int, float), "human.c"))),
            calibrate_target=float(_get(raw, "human.calibrate_target", 0.25)),
            calibrate_tol=float(_get(raw, "human.calibrate_tol", 0.05)),
            temperature=float(_get(raw, "human.temperature", 0.02)),
            expert_noise_std=float(_get(raw, "human.expert_noise_std", 0.005)),
            mental_rollouts=int(_get(raw, "human.mental_rollouts", 100)),
            sticky_steps=int(_get(raw, "human.sticky_steps", 0)),
        )
        if human.sigma <= 0:
            raise ConfigError("human.sigma: must be positive")
        if not 0.0 < human.calibrate_target < 1.0:
            raise ConfigError("human.calibrate_target: must lie in (0, 1)")

        band_raw = _get(raw, "initial_policy.band", [0.2, 0.6])
        if band_raw in (False, "off", None):
            band = None
        elif isinstance(band_raw, list) and len(band_raw) == 2:
            band = (float(band_raw[0]), float(band_raw[1]))
        else:
            raise ConfigError("initial_policy.band: must be [lo, hi] or 'off'")
        style = _get(raw, "initial_policy.style", "diffuse")
        if style not in ("diffuse", "decisive"):
            raise ConfigError("initial_policy.style: must be 'diffuse' or 'decisive'")
        initial = InitialPolicyFields(
            corruption=float(_get(raw, "initial_policy.corruption", 0.22)),
            style=style,
            teacher_episodes=int(_get(raw, "initial_policy.teacher_episodes", 150)),
            bc_epochs=int(_get(raw, "initial_policy.bc_epochs", 60)),
            bc_lr=float(_get(raw, "initial_policy.bc_lr", 1e-3)),
            band=band,
        )
        if not 0.0 <= initial.corruption <= 1.0:
            raise ConfigError("initial_policy.corruption: must lie in [0, 1]")

        lam = float(_get(raw, "training.lambda", 0.5))
        if not 0.0 <= lam <= 1.0:
            raise ConfigError("training.lambda: must lie in [0, 1]")
        l_raw = int(_get(raw, "training.batches_per_epoch", 0))
        training = TrainingFields(
            lam=lam,
            m_samples=int(_get(raw, "training.m_samples", 16)),
            batch_size=int(_get(raw, "training.batch_size", 64)),
            batches_per_epoch=None if l_raw == 0 else l_raw,
            epochs=int(_get(raw, "training.epochs", 300)),
            lr=float(_get(raw, "training.lr", 2e-4)),
        )
        if training.epochs < 1 or training.batch_size < 1 or training.m_samples < 1:
            raise ConfigError("training.epochs, batch_size, and m_samples must be >= 1")

        return ExperimentConfig(
            env_kind=env_kind,
            env_spec=env_spec,
            method=method,
            seeds=list(seeds),
            iterations=iterations,
            episodes_per_iteration=k,
            eval_episodes=eval_eps,
            intervention_budget=None if budget == 0 else budget,
            human=human,
            initial=initial,
            training=training,
            raw=raw,
        )

    def canonical_dict(self) -> dict:
        """JSON-serializable view used for hashing and the manifest."""

        def clean(v):
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, list):
                return [clean(x) for x in v]
            return v

        return clean(self.raw)


def _build_env_spec(kind: str, env_raw: dict):
    try:
        if kind == "gridnav":
            text = env_raw.get("map", DEFAULT_MAP)
            kwargs = {}
            for key in ("horizon", "gamma", "step_reward", "goal_reward", "hazard_reward"):
                if key in env_raw:
                    kwargs[key] = env_raw[key]
            return GridNavSpec.from_ascii(text, **kwargs)
        kwargs = {}
        for key in (
            "wall_y", "gap_x", "gap_half_width", "success_radius", "max_step", "horizon",
        ):
            if key in env_raw:
                kwargs[key] = env_raw[key]
        for key in ("goal", "start_low", "start_high"):
            if key in env_raw:
                kwargs[key] = tuple(env_raw[key])
        return ReachGap2DSpec(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"env: {exc}") from exc


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    if text in ("true", "false"):
        return text == "true"
    if "," in text:
        return [_parse_scalar(t) for t in text.split(",")]
    return text


def _apply_override(raw: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} must look like section.key=value")
    key, value = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = raw
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key}: {part} is not a table")
    node[parts[-1]] = _parse_scalar(value.strip())
