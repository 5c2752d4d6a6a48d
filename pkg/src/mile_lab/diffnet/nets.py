"""Feed-forward policy networks over a flat float64 parameter vector.

A network is described by an immutable :class:`NetSpec`; its weights live in a
single flat array with a deterministic layout so that gradients, optimizer
state, and serialized checkpoints all share one indexing scheme.

Two forward paths are provided: :func:`forward` is a plain-numpy evaluation
used in rollouts, and :func:`forward_graph` builds the autodiff graph used by
the training losses. Both compute identical values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from . import tensor as T
from .tensor import Tensor

PARAM_LAYOUT_VERSION = 1
VARIANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class CategoricalHead:
    n_actions: int


@dataclass(frozen=True)
class GaussianHead:
    action_dim: int


Head = Union[CategoricalHead, GaussianHead]


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    hidden_dims: tuple[int, ...]
    head: Head
    activation: str = "tanh"

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError(f"hidden dims must all be >= 1, got {self.hidden_dims}")
        if self.activation not in ("tanh", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        n_out = (
            self.head.n_actions
            if isinstance(self.head, CategoricalHead)
            else self.head.action_dim
        )
        if n_out < 1:
            raise ValueError("head output dimension must be >= 1")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))

    @property
    def output_dim(self) -> int:
        if isinstance(self.head, CategoricalHead):
            return self.head.n_actions
        # mean and log-variance per action dimension
        return 2 * self.head.action_dim

    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_dims, self.output_dim]
        return list(zip(dims[:-1], dims[1:]))

    def layout(self) -> list[tuple[str, int, int, tuple[int, ...]]]:
        """(name, start, stop, shape) for every weight matrix and bias, in order."""
        entries = []
        offset = 0
        for i, (fan_in, fan_out) in enumerate(self.layer_shapes()):
            entries.append((f"W{i}", offset, offset + fan_in * fan_out, (fan_in, fan_out)))
            offset += fan_in * fan_out
            entries.append((f"b{i}", offset, offset + fan_out, (fan_out,)))
            offset += fan_out
        return entries

    @property
    def n_params(self) -> int:
        return sum(
            fan_in * fan_out + fan_out for fan_in, fan_out in self.layer_shapes()
        )

    def to_dict(self) -> dict:
        head = (
            {"kind": "categorical", "n_actions": self.head.n_actions}
            if isinstance(self.head, CategoricalHead)
            else {"kind": "gaussian", "action_dim": self.head.action_dim}
        )
        return {
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "head": head,
            "activation": self.activation,
        }

    @staticmethod
    def from_dict(d: dict) -> "NetSpec":
        head_d = d["head"]
        if head_d["kind"] == "categorical":
            head: Head = CategoricalHead(int(head_d["n_actions"]))
        elif head_d["kind"] == "gaussian":
            head = GaussianHead(int(head_d["action_dim"]))
        else:
            raise ValueError(f"unknown head kind {head_d['kind']!r}")
        return NetSpec(
            input_dim=int(d["input_dim"]),
            hidden_dims=tuple(int(h) for h in d["hidden_dims"]),
            head=head,
            activation=d.get("activation", "tanh"),
        )


@dataclass
class DistOutput:
    """Action distribution emitted by a network head.

    ``probs`` is set for categorical heads, ``mean``/``var`` for gaussian
    heads. Arrays carry a leading batch axis iff the input did.
    """

    kind: str
    probs: np.ndarray | None = None
    mean: np.ndarray | None = None
    var: np.ndarray | None = None


def init_params(spec: NetSpec, seed: int) -> np.ndarray:
    """Deterministic scaled-normal init (weights ~ N(0, 1/fan_in), zero biases)."""
    rng = np.random.default_rng(seed)
    params = np.zeros(spec.n_params, dtype=np.float64)
    for name, start, stop, shape in spec.layout():
        if name.startswith("W"):
            fan_in = shape[0]
            params[start:stop] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=stop - start)
    return params


def _check_obs(spec: NetSpec, obs: np.ndarray) -> tuple[np.ndarray, bool]:
    obs = np.asarray(obs, dtype=np.float64)
    squeeze = obs.ndim == 1
    if squeeze:
        obs = obs[None, :]
    if obs.ndim != 2 or obs.shape[1] != spec.input_dim:
        raise ValueError(
            f"observation has shape {obs.shape}, expected (*, {spec.input_dim})"
        )
    return obs, squeeze


def _raw_forward(spec: NetSpec, params: np.ndarray, obs: np.ndarray) -> np.ndarray:
    act = np.tanh if spec.activation == "tanh" else lambda x: np.maximum(x, 0.0)
    h = obs
    entries = spec.layout()
    n_layers = len(entries) // 2
    for i in range(n_layers):
        _, ws, we, wshape = entries[2 * i]
        _, bs, be, _ = entries[2 * i + 1]
        h = h @ params[ws:we].reshape(wshape) + params[bs:be]
        if i < n_layers - 1:
            h = act(h)
    return h


def forward(spec: NetSpec, params: np.ndarray, obs: np.ndarray) -> DistOutput:
    """Plain-numpy forward pass; deterministic given (params, obs)."""
    if params.shape != (spec.n_params,):
        raise ValueError(
            f"param vector has length {params.shape}, expected ({spec.n_params},)"
        )
    obs2, squeeze = _check_obs(spec, obs)
    raw = _raw_forward(spec, params, obs2)
    if isinstance(spec.head, CategoricalHead):
        shifted = raw - raw.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        probs = e / e.sum(axis=1, keepdims=True)
        if squeeze:
            probs = probs[0]
        return DistOutput(kind="categorical", probs=probs)
    d = spec.head.action_dim
    mean_v = raw[:, :d]
    var = np.maximum(np.exp(raw[:, d:]), VARIANCE_FLOOR)
    if squeeze:
        mean_v, var = mean_v[0], var[0]
    return DistOutput(kind="gaussian", mean=mean_v, var=var)


def forward_graph(spec: NetSpec, params: Tensor, obs: np.ndarray):
    """Autodiff forward pass.

    Returns the categorical log-probs tensor (B, A), or the pair of
    (mean, variance) tensors (B, d) for gaussian heads.
    """
    obs2, _ = _check_obs(spec, obs)
    act = T.tanh if spec.activation == "tanh" else T.relu
    h: Tensor = Tensor(obs2)
    entries = spec.layout()
    n_layers = len(entries) // 2
    for i in range(n_layers):
        _, ws, we, wshape = entries[2 * i]
        _, bs, be, _ = entries[2 * i + 1]
        w = T.reshape(params[ws:we], wshape)
        b = params[bs:be]
        h = T.matmul(h, w) + b
        if i < n_layers - 1:
            h = act(h)
    if isinstance(spec.head, CategoricalHead):
        return T.log_softmax(h, axis=1)
    d = spec.head.action_dim
    mean_t = h[:, :d]
    var_t = T.maximum(T.exp(h[:, d:]), VARIANCE_FLOOR)
    return mean_t, var_t


# -- policy wrapper -------------------------------------------------------------


@dataclass
class Policy:
    """A network bound to its parameters, with sampling helpers."""

    spec: NetSpec
    params: np.ndarray

    def dist(self, obs: np.ndarray) -> DistOutput:
        return forward(self.spec, self.params, obs)

    def act(self, obs: np.ndarray, rng: np.random.Generator):
        out = self.dist(obs)
        if out.kind == "categorical":
            return int(rng.choice(len(out.probs), p=out.probs))
        return out.mean + np.sqrt(out.var) * rng.standard_normal(out.mean.shape)

    def act_batch(self, obs: np.ndarray, rng: np.random.Generator):
        out = self.dist(obs)
        if out.kind == "categorical":
            u = rng.random((out.probs.shape[0], 1))
            return (out.probs.cumsum(axis=1) < u).sum(axis=1)
        return out.mean + np.sqrt(out.var) * rng.standard_normal(out.mean.shape)

    def clone(self) -> "Policy":
        return Policy(self.spec, self.params.copy())


# -- serialization ---------------------------------------------------------------


def save_params(path: str | Path, spec: NetSpec, params: np.ndarray, meta: dict | None = None) -> None:
    """Write ``<path>.bin`` (little-endian float64 blob) and ``<path>.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = np.ascontiguousarray(params, dtype="<f8")
    path.with_suffix(".bin").write_bytes(blob.tobytes())
    sidecar = {
        "layout_version": PARAM_LAYOUT_VERSION,
        "n_params": int(spec.n_params),
        "spec": spec.to_dict(),
    }
    if meta:
        sidecar["meta"] = meta
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_params(path: str | Path) -> tuple[NetSpec, np.ndarray, dict]:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    version = sidecar.get("layout_version")
    if version != PARAM_LAYOUT_VERSION:
        raise ValueError(
            f"parameter layout version mismatch: file has {version}, "
            f"code expects {PARAM_LAYOUT_VERSION}"
        )
    spec = NetSpec.from_dict(sidecar["spec"])
    raw = path.with_suffix(".bin").read_bytes()
    params = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if params.shape != (spec.n_params,):
        raise ValueError(
            f"parameter blob holds {params.size} floats, spec expects {spec.n_params} "
            "(truncated or corrupt file)"
        )
    return spec, params, sidecar.get("meta", {})
