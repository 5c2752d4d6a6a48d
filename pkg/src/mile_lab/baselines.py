"""Interactive imitation-learning baselines and intervention predictors.

Every baseline consumes the same deployment data as the main method: episodes
collected under the current policy with the simulated human free to take
over. They differ only in which records they train on and with what weights:

- HG-DAgger: fine-tunes on intervention records only.
- IWR preset: weighted BC over all records with intervention /
  non-intervention classes balanced.
- Sirius preset: weighted BC with intervention steps upweighted and the
  window just before an intervention downweighted.
- interventions-only BC: a fresh net fit to intervention records each round.

The weighting presets are approximations reconstructed from one-line
descriptions; constants are configurable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bc import BCConfig, bc_train
from .datastore import Dataset, EpisodeStore, TransitionRecord
from .diffnet import CategoricalHead, NetSpec, Policy, init_params
from .learning import IterationMetrics
from .rollout import success_rate
from .seeding import rng_for
from .sim_human import SimulatedHuman, run_deployment

BASELINE_METHODS = ("hg_dagger", "iwr", "sirius", "bc_interventions")


@dataclass(frozen=True)
class WeightingScheme:
    w_intervention: float | str = 1.0  # positive number, or "balanced"
    w_robot: float | str = 1.0
    w_pre_intervention: float = 1.0
    pre_window: int = 0

    def __post_init__(self):
        for name in ("w_intervention", "w_robot"):
            v = getattr(self, name)
            if v != "balanced" and (not isinstance(v, (int, float)) or v <= 0):
                raise ValueError(f"{name} must be positive or 'balanced'")
        if self.w_pre_intervention < 0 or self.pre_window < 0:
            raise ValueError("pre-intervention weight and window must be non-negative")


IWR_SCHEME = WeightingScheme(w_intervention="balanced", w_robot="balanced")
SIRIUS_SCHEME = WeightingScheme(w_intervention=2.0, w_robot=1.0, w_pre_intervention=0.1, pre_window=5)


def assemble_weights(records: list[TransitionRecord], scheme: WeightingScheme) -> np.ndarray:
    """Per-record weights under a scheme, normalized to mean 1."""
    n = len(records)
    nu = np.array([r.nu for r in records])
    weights = np.ones(n, dtype=np.float64)
    if scheme.w_intervention == "balanced" or scheme.w_robot == "balanced":
        n_int, n_rob = int(nu.sum()), int((1 - nu).sum())
        if n_int == 0 or n_rob == 0:
            raise ValueError("balanced weighting needs both record classes present")
        weights[nu == 1] = n / (2.0 * n_int)
        weights[nu == 0] = n / (2.0 * n_rob)
    else:
        weights[nu == 1] = scheme.w_intervention
        weights[nu == 0] = scheme.w_robot
        if scheme.pre_window > 0:
            by_ep: dict[int, list[int]] = {}
            for i, r in enumerate(records):
                by_ep.setdefault((r.iter, r.ep), []).append(i)
            for idxs in by_ep.values():
                ts = {records[i].t: i for i in idxs}
                for i in idxs:
                    if records[i].nu != 1:
                        continue
                    for dt in range(1, scheme.pre_window + 1):
                        j = ts.get(records[i].t - dt)
                        if j is not None and records[j].nu == 0:
                            weights[j] = scheme.w_pre_intervention
    total = weights.sum()
    if total == 0:
        raise ValueError("weighting scheme assigns zero weight to every record")
    return weights * (len(records) / total)


def _labeled_arrays(records: list[TransitionRecord], use_human_else_robot: bool = True):
    obs = np.array([r.obs for r in records], dtype=np.float64)
    labels = [r.a_h if (r.nu == 1 and use_human_else_robot) else r.a_r for r in records]
    first = labels[0]
    if np.isscalar(first) or np.asarray(first).ndim == 0:
        return obs, np.array(labels, dtype=np.intp)
    return obs, np.array(labels, dtype=np.float64)


def train_hg_dagger(
    dataset: Dataset, current_policy: Policy, cfg: BCConfig, seed: int
) -> Policy:
    """Fine-tune the current policy on intervention records only."""
    intervened = [r for r in dataset if r.nu == 1]
    if not intervened:
        raise ValueError("HG-DAgger needs at least one intervention record")
    obs = np.array([r.obs for r in intervened], dtype=np.float64)
    actions = (
        np.array([r.a_h for r in intervened], dtype=np.intp)
        if np.isscalar(intervened[0].a_h)
        else np.array([r.a_h for r in intervened], dtype=np.float64)
    )
    result = bc_train(current_policy.spec, current_policy.params.copy(), obs, actions, cfg, seed)
    return Policy(current_policy.spec, result.params)


def train_weighted_bc(
    dataset: Dataset,
    current_policy: Policy,
    scheme: WeightingScheme,
    cfg: BCConfig,
    seed: int,
) -> Policy:
    """Weighted BC over every record; label is a_h on intervention steps, else a_r."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    records = list(dataset)
    obs, actions = _labeled_arrays(records)
    weights = assemble_weights(records, scheme)
    result = bc_train(
        current_policy.spec, current_policy.params.copy(), obs, actions, cfg, seed,
        weights=weights,
    )
    return Policy(current_policy.spec, result.params)


def train_bc_interventions(
    dataset: Dataset, policy_spec: NetSpec, cfg: BCConfig, seed: int
) -> Policy:
    """Fresh net trained on intervention records only."""
    fresh = Policy(policy_spec, init_params(policy_spec, seed))
    return train_hg_dagger(dataset, fresh, cfg, seed)


# -- intervention predictors -------------------------------------------------------


def balanced_accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    y_true = np.asarray(y_true).astype(int)
    y_pred = np.asarray(y_pred).astype(int)
    recalls = []
    for cls in (0, 1):
        mask = y_true == cls
        if mask.any():
            recalls.append(float((y_pred[mask] == cls).mean()))
    return float(np.mean(recalls))


def f1_score(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    y_true = np.asarray(y_true).astype(int)
    y_pred = np.asarray(y_pred).astype(int)
    tp = int(((y_true == 1) & (y_pred == 1)).sum())
    fp = int(((y_true == 0) & (y_pred == 1)).sum())
    fn = int(((y_true == 1) & (y_pred == 0)).sum())
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


@dataclass
class ClassifierResult:
    policy: Policy
    holdout_accuracy: float
    holdout_f1: float


def train_intervention_classifier(
    dataset: Dataset,
    cfg: BCConfig,
    seed: int,
    hidden_dims: tuple[int, ...] = (64, 64),
    holdout_frac: float = 0.2,
) -> ClassifierResult:
    """State -> nu binary classifier (2-class net, cross-entropy training)."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    obs = dataset.obs_matrix()
    nu = dataset.nu_vector()
    if len(np.unique(nu)) < 2:
        raise ValueError("classifier needs both intervention and non-intervention records")
    spec = NetSpec(obs.shape[1], hidden_dims, CategoricalHead(2))
    rng = rng_for(seed, "clf-split")
    order = rng.permutation(len(nu))
    n_hold = max(1, int(round(holdout_frac * len(nu))))
    hold, train = order[:n_hold], order[n_hold:]
    result = bc_train(spec, init_params(spec, seed), obs[train], nu[train], cfg, seed)
    policy = Policy(spec, result.params)
    pred = policy.dist(obs[hold]).probs.argmax(axis=1)
    acc = float((pred == nu[hold]).mean())
    return ClassifierResult(policy=policy, holdout_accuracy=acc, holdout_f1=f1_score(nu[hold], pred))


@dataclass
class MajorityPredictor:
    majority_class: int
    accuracy: float
    intervention_recall: float

    def predict(self, n: int) -> np.ndarray:
        return np.full(n, self.majority_class, dtype=int)


def majority_predictor(dataset: Dataset) -> MajorityPredictor:
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    nu = dataset.nu_vector()
    majority = int(nu.mean() >= 0.5)
    acc = float((nu == majority).mean())
    recall = float((nu[nu == 1] == majority).mean()) if (nu == 1).any() else 0.0
    return MajorityPredictor(majority_class=majority, accuracy=acc, intervention_recall=recall)


# -- the shared interactive loop ----------------------------------------------------


@dataclass
class BaselineRun:
    policy: Policy
    metrics: list[IterationMetrics] = field(default_factory=list)


def run_baseline(
    env,
    method: str,
    initial_policy: Policy,
    human: SimulatedHuman,
    cfg: BCConfig,
    n_iterations: int,
    k_episodes: int,
    seed: int,
    store: EpisodeStore | None = None,
    eval_episodes: int = 100,
    intervention_budget: int | None = None,
    max_iterations: int = 60,
) -> BaselineRun:
    """Deploy-then-train loop shared by all baselines.

    With ``intervention_budget`` set, rounds continue (k episodes each) until
    the aggregated dataset holds at least that many intervention steps, so
    comparisons against the main method use matched budgets.
    """
    if method not in BASELINE_METHODS:
        raise ValueError(f"unknown baseline {method!r}")
    policy = initial_policy.clone()
    all_records: list[TransitionRecord] = []
    metrics: list[IterationMetrics] = []
    total_eps = 0
    i = 0
    while True:
        episodes = run_deployment(env, policy, human, k_episodes, seed, iteration=i)
        if store is not None:
            for ep in episodes:
                store.append_episode(ep)
        for ep in episodes:
            all_records.extend(ep)
        total_eps += k_episodes
        dataset = Dataset(list(all_records))
        train_seed = int(rng_for(seed, "baseline-train", i).integers(2**31))
        if dataset.n_interventions > 0:
            if method == "hg_dagger":
                policy = train_hg_dagger(dataset, policy, cfg, train_seed)
            elif method == "iwr":
                policy = train_weighted_bc(dataset, policy, IWR_SCHEME, cfg, train_seed)
            elif method == "sirius":
                policy = train_weighted_bc(dataset, policy, SIRIUS_SCHEME, cfg, train_seed)
            else:
                policy = train_bc_interventions(dataset, policy.spec, cfg, train_seed)
        rate = success_rate(
            env, policy.act, eval_episodes, int(rng_for(seed, "eval", i).integers(2**31))
        )
        metrics.append(
            IterationMetrics(
                iteration=i,
                episodes=total_eps,
                interventions=dataset.n_interventions,
                intervention_rate=dataset.intervention_rate,
                loss=float("nan"),
                success_rate=rate,
                seed=seed,
            )
        )
        i += 1
        if intervention_budget is not None:
            if dataset.n_interventions >= intervention_budget or i >= max_iterations:
                break
        elif i >= n_iterations:
            break
    return BaselineRun(policy=policy, metrics=metrics)
