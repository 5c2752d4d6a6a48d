"""Persistence: JSONL transition records, run manifests, training checkpoints.

One file per deployment iteration (``iter_<i>.jsonl``) plus ``manifest.json``
under a run directory. Records keep full float64 precision (json round-trip)
and are validated on append.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diffnet import AdamState, NetSpec, load_params, save_params

RECORD_FIELDS = (
    "ep", "t", "obs", "a_r", "a_h", "nu", "next_obs",
    "reward", "done", "success", "iter", "source",
)


@dataclass
class TransitionRecord:
    """One interaction timestep; ``a_h`` is None unless the human intervened."""

    ep: int
    t: int
    obs: np.ndarray
    a_r: object
    a_h: object | None
    nu: int
    next_obs: np.ndarray
    reward: float
    done: bool
    success: bool
    iter: int
    source: str

    def to_json_dict(self) -> dict:
        def enc_action(a):
            if a is None:
                return None
            if np.isscalar(a) or np.asarray(a).ndim == 0:
                return int(a)
            return [float(x) for x in np.asarray(a)]

        return {
            "ep": int(self.ep),
            "t": int(self.t),
            "obs": [float(x) for x in np.asarray(self.obs)],
            "a_r": enc_action(self.a_r),
            "a_h": enc_action(self.a_h),
            "nu": int(self.nu),
            "next_obs": [float(x) for x in np.asarray(self.next_obs)],
            "reward": float(self.reward),
            "done": bool(self.done),
            "success": bool(self.success),
            "iter": int(self.iter),
            "source": self.source,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "TransitionRecord":
        def dec_action(a):
            if a is None:
                return None
            if isinstance(a, list):
                return np.asarray(a, dtype=np.float64)
            return int(a)

        return TransitionRecord(
            ep=int(d["ep"]),
            t=int(d["t"]),
            obs=np.asarray(d["obs"], dtype=np.float64),
            a_r=dec_action(d["a_r"]),
            a_h=dec_action(d["a_h"]),
            nu=int(d["nu"]),
            next_obs=np.asarray(d["next_obs"], dtype=np.float64),
            reward=float(d["reward"]),
            done=bool(d["done"]),
            success=bool(d["success"]),
            iter=int(d["iter"]),
            source=d["source"],
        )


class RecordValidationError(ValueError):
    pass


def validate_episode(records: list[TransitionRecord]) -> None:
    if not records:
        raise RecordValidationError("episode has no records")
    last_t = None
    for i, rec in enumerate(records):
        if rec.nu not in (0, 1):
            raise RecordValidationError(f"record {i}: nu must be 0 or 1")
        if (rec.nu == 1) != (rec.a_h is not None):
            raise RecordValidationError(
                f"record {i}: nu={rec.nu} inconsistent with a_h "
                f"{'present' if rec.a_h is not None else 'absent'}"
            )
        if last_t is not None and rec.t <= last_t:
            raise RecordValidationError(f"record {i}: t not strictly increasing")
        last_t = rec.t
        if rec.done and i != len(records) - 1:
            raise RecordValidationError(f"record {i}: done before final record")
    if not records[-1].done:
        raise RecordValidationError("final record must have done=True")


@dataclass
class Dataset:
    """In-memory, ordered view of loaded records."""

    records: list[TransitionRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def n_interventions(self) -> int:
        return sum(r.nu for r in self.records)

    @property
    def intervention_rate(self) -> float:
        return self.n_interventions / len(self.records) if self.records else 0.0

    def obs_matrix(self) -> np.ndarray:
        return np.array([r.obs for r in self.records], dtype=np.float64)

    def nu_vector(self) -> np.ndarray:
        return np.array([r.nu for r in self.records], dtype=np.intp)

    def minibatches(self, batch_size: int, seed: int):
        """Shuffled minibatch index stream; identical order for identical seeds."""
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(self.records))
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            yield [self.records[i] for i in idx]


class EpisodeStore:
    """Append-only JSONL store, one file per deployment iteration."""

    def __init__(self, run_dir: str | Path):
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)

    def _iter_path(self, iteration: int) -> Path:
        return self.run_dir / f"iter_{iteration}.jsonl"

    def append_episode(self, episode: list[TransitionRecord]) -> int:
        validate_episode(episode)
        iteration = episode[0].iter
        if any(r.iter != iteration for r in episode):
            raise RecordValidationError("episode spans multiple iterations")
        path = self._iter_path(iteration)
        offset = path.stat().st_size if path.exists() else 0
        lines = [json.dumps(r.to_json_dict(), separators=(",", ":")) for r in episode]
        with path.open("a", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        return offset

    def iterations_present(self) -> list[int]:
        its = []
        for p in self.run_dir.glob("iter_*.jsonl"):
            try:
                its.append(int(p.stem.split("_", 1)[1]))
            except ValueError:
                continue
        return sorted(its)

    def load_dataset(
        self, max_iter: int | None = None, source: str | None = None
    ) -> Dataset:
        iterations = self.iterations_present()
        if max_iter is not None:
            iterations = [i for i in iterations if i <= max_iter]
        records: list[TransitionRecord] = []
        for i in iterations:
            path = self._iter_path(i)
            if not path.exists():
                raise FileNotFoundError(f"missing store file {path}")
            with path.open(encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = TransitionRecord.from_json_dict(json.loads(line))
                    if source is None or rec.source == source:
                        records.append(rec)
        return Dataset(records)


# -- manifests -----------------------------------------------------------------


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_manifest(run_dir: str | Path, manifest: dict) -> None:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def read_manifest(run_dir: str | Path) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no manifest at {path}")
    manifest = json.loads(path.read_text())
    cfg = manifest.get("config")
    if cfg is not None and manifest.get("config_hash") != config_hash(cfg):
        raise ValueError("manifest config hash does not match its config")
    return manifest


# -- checkpoints ----------------------------------------------------------------


def _save_adam(path: Path, state: AdamState) -> None:
    np.ascontiguousarray(state.m, dtype="<f8").tofile(path.with_suffix(".m.bin"))
    np.ascontiguousarray(state.v, dtype="<f8").tofile(path.with_suffix(".v.bin"))


def _load_adam(path: Path, meta: dict) -> AdamState:
    m = np.fromfile(path.with_suffix(".m.bin"), dtype="<f8")
    v = np.fromfile(path.with_suffix(".v.bin"), dtype="<f8")
    return AdamState(
        lr=meta["lr"], beta1=meta["beta1"], beta2=meta["beta2"], eps=meta["eps"],
        t=meta["t"], m=m, v=v,
    )


def checkpoint(state, path: str | Path) -> None:
    """Persist a TrainState (policy + mental model + optimizer state)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    save_params(path / "policy", state.policy_spec, state.policy_params)
    save_params(path / "mental", state.mental_spec, state.mental_params)
    _save_adam(path / "opt_policy", state.opt_policy)
    _save_adam(path / "opt_mental", state.opt_mental)
    meta = {
        "iteration": state.iteration,
        "loss_history": state.loss_history,
        "opt_policy": {k: getattr(state.opt_policy, k) for k in ("lr", "beta1", "beta2", "eps", "t")},
        "opt_mental": {k: getattr(state.opt_mental, k) for k in ("lr", "beta1", "beta2", "eps", "t")},
    }
    (path / "state.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def restore(path: str | Path):
    from .learning import TrainState  # deferred: learning builds on this module

    path = Path(path)
    meta = json.loads((path / "state.json").read_text())
    policy_spec, policy_params, _ = load_params(path / "policy")
    mental_spec, mental_params, _ = load_params(path / "mental")
    return TrainState(
        policy_spec=policy_spec,
        policy_params=policy_params,
        mental_spec=mental_spec,
        mental_params=mental_params,
        opt_policy=_load_adam(path / "opt_policy", meta["opt_policy"]),
        opt_mental=_load_adam(path / "opt_mental", meta["opt_mental"]),
        iteration=meta["iteration"],
        loss_history=meta["loss_history"],
    )
