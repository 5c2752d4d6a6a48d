"""Behavioral cloning: (weighted) maximum-likelihood fitting of a policy net.

Shared by the suboptimal-initial-policy builder, the simulated human's mental
model, and the weighted-BC baselines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffnet
from .diffnet import AdamState, NetSpec, Tensor, adam_step, forward_graph
from .diffnet import tensor as T

LN_2PI = float(np.log(2.0 * np.pi))


@dataclass
class BCConfig:
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    holdout_frac: float = 0.0


@dataclass
class BCResult:
    params: np.ndarray
    train_nll: float
    holdout_nll: float | None


def nll_graph(spec: NetSpec, params_t: Tensor, obs: np.ndarray, actions: np.ndarray,
              weights: np.ndarray | None = None):
    """Weighted mean negative log-likelihood of actions under the net's head."""
    if isinstance(spec.head, diffnet.CategoricalHead):
        lp = forward_graph(spec, params_t, obs)
        per = T.gather(lp, np.asarray(actions, dtype=np.intp), axis=1)
    else:
        mean_t, var_t = forward_graph(spec, params_t, obs)
        a = np.asarray(actions, dtype=np.float64)
        sq = (Tensor(a) - mean_t) ** 2.0
        per = T.sum_(T.log(var_t) + sq / var_t, axis=1) * (-0.5) + (
            -0.5 * LN_2PI * a.shape[1]
        )
    if weights is not None:
        per = per * Tensor(np.asarray(weights, dtype=np.float64))
    return T.mean(per) * (-1.0)


def nll_numpy(spec: NetSpec, params: np.ndarray, obs: np.ndarray, actions: np.ndarray) -> float:
    out = diffnet.forward(spec, params, obs)
    if out.kind == "categorical":
        picked = np.take_along_axis(out.probs, np.asarray(actions, dtype=np.intp)[:, None], 1)
        return float(-np.mean(np.log(np.maximum(picked, 1e-300))))
    a = np.asarray(actions, dtype=np.float64)
    lp = -0.5 * np.sum(np.log(2.0 * np.pi * out.var) + (a - out.mean) ** 2 / out.var, axis=1)
    return float(-np.mean(lp))


def bc_train(
    spec: NetSpec,
    params0: np.ndarray,
    obs: np.ndarray,
    actions: np.ndarray,
    cfg: BCConfig,
    seed: int,
    weights: np.ndarray | None = None,
) -> BCResult:
    """Adam on the (weighted) NLL; deterministic given the seed.

    Raises if the dataset is empty or the loss diverges.
    """
    obs = np.asarray(obs, dtype=np.float64)
    n = obs.shape[0]
    if n == 0:
        raise ValueError("behavioral cloning requires a non-empty dataset")
    actions = np.asarray(actions)
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if np.all(weights == 0):
            raise ValueError("all-zero sample weights")
        weights = weights / weights.mean()

    rng = np.random.default_rng(seed)
    holdout_n = int(round(cfg.holdout_frac * n)) if cfg.holdout_frac > 0 else 0
    order = rng.permutation(n)
    hold_idx, train_idx = order[:holdout_n], order[holdout_n:]
    if train_idx.size == 0:
        raise ValueError("holdout fraction leaves no training data")

    params = params0.copy()
    state = AdamState(lr=cfg.lr)
    last = np.inf
    for _ in range(cfg.epochs):
        perm = rng.permutation(train_idx.size)
        for start in range(0, train_idx.size, cfg.batch_size):
            idx = train_idx[perm[start : start + cfg.batch_size]]
            pt = Tensor(params, requires_grad=True)
            loss = nll_graph(spec, pt, obs[idx], actions[idx],
                             None if weights is None else weights[idx])
            if not np.isfinite(loss.data):
                raise RuntimeError("behavioral cloning loss diverged (non-finite)")
            loss.backward()
            params = adam_step(params, pt.grad, state)
            last = float(loss.data)
    holdout = nll_numpy(spec, params, obs[hold_idx], actions[hold_idx]) if holdout_n else None
    return BCResult(params=params, train_nll=last, holdout_nll=holdout)
