"""Experiment orchestration: per-seed pipelines, metric CSVs, comparisons."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..baselines import (
    balanced_accuracy,
    majority_predictor,
    run_baseline,
    train_intervention_classifier,
)
from ..bc import BCConfig
from ..datastore import EpisodeStore, config_hash, write_manifest
from ..diffnet import Policy, load_params, save_params
from ..envs import (
    GridNavEnv,
    InitialPolicyConfig,
    ReachGap2DEnv,
    make_initial_policy,
    value_iteration,
)
from ..intervention import InterventionParams, calibrate_c
from ..learning import IterationMetrics, LossConfig, predict_nu, run_mile
from ..rollout import success_rate
from ..seeding import rng_for
from ..sim_human import SimulatedHuman, fit_mental_model, run_deployment
from .config import ExperimentConfig

from .. import __version__

CSV_HEADER = "iter,episodes,interventions,intervention_rate,loss,success_rate,seed"


def runs_root(explicit: str | None = None) -> Path:
    if explicit:
        return Path(explicit)
    return Path(os.environ.get("MILE_RUNS_DIR", "runs"))


def _fmt(x: float) -> str:
    if isinstance(x, float) and np.isnan(x):
        return "nan"
    return repr(float(x))


def metrics_to_csv(rows: list[IterationMetrics]) -> str:
    lines = [CSV_HEADER]
    for m in rows:
        lines.append(
            f"{m.iteration},{m.episodes},{m.interventions},"
            f"{_fmt(m.intervention_rate)},{_fmt(m.loss)},{_fmt(m.success_rate)},{m.seed}"
        )
    return "\n".join(lines) + "\n"


def build_env(cfg: ExperimentConfig):
    if cfg.env_kind == "gridnav":
        return GridNavEnv(cfg.env_spec)
    return ReachGap2DEnv(cfg.env_spec)


@dataclass
class SeedPipeline:
    """Everything a method run needs for one seed."""

    env: object
    q_table: object | None
    initial_policy: Policy
    mental_model: Policy
    human: SimulatedHuman
    c: float
    achieved_rate: float | None
    initial_success: float


def build_pipeline(cfg: ExperimentConfig, seed: int) -> SeedPipeline:
    env = build_env(cfg)
    q_table = value_iteration(cfg.env_spec) if cfg.env_kind == "gridnav" else None
    init_cfg = InitialPolicyConfig(
        n_teacher_episodes=cfg.initial.teacher_episodes,
        band=cfg.initial.band,
        style=cfg.initial.style,
        bc=BCConfig(epochs=cfg.initial.bc_epochs, lr=cfg.initial.bc_lr),
    )
    initial_policy = make_initial_policy(
        env, cfg.initial.corruption, seed, q_table=q_table, cfg=init_cfg
    )
    mental_model, _ = fit_mental_model(
        initial_policy, env, n_rollouts=cfg.human.mental_rollouts, seed=seed
    )
    base = SimulatedHuman(
        mental_model=mental_model,
        params=InterventionParams(c=cfg.human.c or 0.0, sigma=cfg.human.sigma),
        q_table=q_table if cfg.env_kind == "gridnav" else None,
        temperature=cfg.human.temperature,
        env_spec=cfg.env_spec if cfg.env_kind == "reachgap" else None,
        expert_noise_std=cfg.human.expert_noise_std,
        sticky_steps=cfg.human.sticky_steps,
    )
    if cfg.human.c is None:
        c, rate = calibrate_c(
            env, initial_policy, base,
            target_rate=cfg.human.calibrate_target,
            tol=cfg.human.calibrate_tol,
            seed=int(rng_for(seed, "calibration").integers(2**31)),
        )
    else:
        c, rate = cfg.human.c, None
    human = base.with_params(InterventionParams(c=c, sigma=cfg.human.sigma))
    init_sr = success_rate(
        env, initial_policy.act, cfg.eval_episodes,
        int(rng_for(seed, "initial-eval").integers(2**31)),
    )
    return SeedPipeline(
        env=env, q_table=q_table, initial_policy=initial_policy,
        mental_model=mental_model, human=human, c=c, achieved_rate=rate,
        initial_success=init_sr,
    )


def loss_config(cfg: ExperimentConfig, human: SimulatedHuman) -> LossConfig:
    return LossConfig(
        params=human.params,
        lam=cfg.training.lam,
        m_samples=cfg.training.m_samples,
        batch_size=cfg.training.batch_size,
        batches_per_epoch=cfg.training.batches_per_epoch,
        epochs=cfg.training.epochs,
        lr=cfg.training.lr,
    )


@dataclass
class SeedResult:
    seed: int
    metrics: list[IterationMetrics]
    initial_success: float
    final_success: float
    c: float
    interventions: int


def run_seed(cfg: ExperimentConfig, seed: int, run_dir: Path) -> SeedResult:
    pipeline = build_pipeline(cfg, seed)
    seed_dir = run_dir / f"seed_{seed}"
    store = EpisodeStore(seed_dir)
    save_params(
        seed_dir / "artifacts" / "initial_policy",
        pipeline.initial_policy.spec, pipeline.initial_policy.params,
    )
    save_params(
        seed_dir / "artifacts" / "mental_model",
        pipeline.mental_model.spec, pipeline.mental_model.params,
    )
    if cfg.method == "mile":
        lcfg = loss_config(cfg, pipeline.human)
        state, metrics = run_mile(
            pipeline.env, pipeline.initial_policy, pipeline.human,
            pipeline.mental_model, lcfg, cfg.iterations, cfg.episodes_per_iteration,
            seed, store=store, eval_episodes=cfg.eval_episodes,
            checkpoint_dir=seed_dir / "checkpoints",
        )
        final_policy = state.policy
    else:
        run = run_baseline(
            pipeline.env, cfg.method, pipeline.initial_policy, pipeline.human,
            BCConfig(epochs=cfg.training.epochs, batch_size=cfg.training.batch_size,
                     lr=cfg.training.lr),
            cfg.iterations, cfg.episodes_per_iteration, seed, store=store,
            eval_episodes=cfg.eval_episodes,
            intervention_budget=cfg.intervention_budget,
        )
        metrics, final_policy = run.metrics, run.policy
    save_params(seed_dir / "checkpoints" / "final" / "policy",
                final_policy.spec, final_policy.params)
    final = metrics[-1].success_rate if metrics else pipeline.initial_success
    interventions = metrics[-1].interventions if metrics else 0
    return SeedResult(
        seed=seed, metrics=metrics, initial_success=pipeline.initial_success,
        final_success=final, c=pipeline.c, interventions=interventions,
    )


def _run_seed_entry(args):
    cfg_dict, seed, run_dir = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    return run_seed(cfg, seed, Path(run_dir))


@dataclass
class RunResult:
    run_dir: Path
    seed_results: list[SeedResult]

    @property
    def final_mean(self) -> float:
        return float(np.mean([r.final_success for r in self.seed_results]))

    @property
    def final_stderr(self) -> float:
        vals = [r.final_success for r in self.seed_results]
        if len(vals) < 2:
            return 0.0
        return float(np.std(vals, ddof=1) / np.sqrt(len(vals)))


def run_experiment(
    cfg: ExperimentConfig, run_dir: str | Path, workers: int = 1
) -> RunResult:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    if workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    _run_seed_entry,
                    [(cfg.raw, seed, str(run_dir)) for seed in cfg.seeds],
                )
            )
    else:
        results = [run_seed(cfg, seed, run_dir) for seed in cfg.seeds]

    rows: list[IterationMetrics] = []
    for res in results:
        rows.extend(res.metrics)
    (run_dir / "metrics.csv").write_text(metrics_to_csv(rows))

    canon = cfg.canonical_dict()
    manifest = {
        "config": canon,
        "config_hash": config_hash(canon),
        "env_kind": cfg.env_kind,
        "method": cfg.method,
        "seeds": cfg.seeds,
        "code_version": __version__,
        "calibrated_c": {str(r.seed): r.c for r in results},
        "initial_success": {str(r.seed): r.initial_success for r in results},
        "final_success": {str(r.seed): r.final_success for r in results},
        "interventions": {str(r.seed): r.interventions for r in results},
    }
    write_manifest(run_dir, manifest)

    result = RunResult(run_dir=run_dir, seed_results=results)
    summary = [
        "method,env,n_seeds,final_success_mean,final_success_stderr,"
        "interventions_mean,initial_success_mean",
        f"{cfg.method},{cfg.env_kind},{len(results)},{_fmt(result.final_mean)},"
        f"{_fmt(result.final_stderr)},"
        f"{_fmt(float(np.mean([r.interventions for r in results])))},"
        f"{_fmt(float(np.mean([r.initial_success for r in results])))}",
    ]
    (run_dir / "summary.csv").write_text("\n".join(summary) + "\n")
    return result


# -- evaluation and comparison ---------------------------------------------------


def evaluate_checkpoint(
    cfg: ExperimentConfig, checkpoint_path: str | Path, episodes: int, seed: int
) -> float:
    """Interventions-disabled success rate of a serialized policy."""
    env = build_env(cfg)
    spec, params, _ = load_params(Path(checkpoint_path))
    policy = Policy(spec, params)
    return success_rate(env, policy.act, episodes, seed)


class CompareError(RuntimeError):
    pass


def compare_runs(run_dirs: list[str | Path], budget_tolerance: float = 0.05):
    """Cross-method table; refuses mismatched envs, flags budget mismatches."""
    from ..datastore import read_manifest

    rows = []
    env_blocks = []
    for rd in run_dirs:
        rd = Path(rd)
        manifest = read_manifest(rd)
        env_blocks.append(manifest["config"].get("env"))
        finals = manifest["final_success"]
        inits = manifest["initial_success"]
        ivs = manifest["interventions"]
        vals = [finals[k] for k in sorted(finals)]
        rows.append(
            {
                "run": rd.name,
                "method": manifest["method"],
                "env": manifest["env_kind"],
                "n_seeds": len(vals),
                "success_mean": float(np.mean(vals)),
                "success_stderr": float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
                if len(vals) > 1
                else 0.0,
                "interventions_mean": float(np.mean([ivs[k] for k in sorted(ivs)])),
                "initial_mean": float(np.mean([inits[k] for k in sorted(inits)])),
                "budget_flag": "",
            }
        )
    first = env_blocks[0]
    for other in env_blocks[1:]:
        if other != first:
            raise CompareError("runs use different environments; comparison refused")
    budgets = [r["interventions_mean"] for r in rows]
    ref = budgets[0]
    for r, b in zip(rows, budgets):
        if ref > 0 and abs(b - ref) / ref > budget_tolerance:
            r["budget_flag"] = "BUDGET_MISMATCH"
    return rows


def comparison_csv(rows: list[dict]) -> str:
    header = (
        "run,method,env,n_seeds,success_mean,success_stderr,"
        "interventions_mean,initial_mean,budget_flag"
    )
    lines = [header]
    for r in rows:
        lines.append(
            f"{r['run']},{r['method']},{r['env']},{r['n_seeds']},"
            f"{_fmt(r['success_mean'])},{_fmt(r['success_stderr'])},"
            f"{_fmt(r['interventions_mean'])},{_fmt(r['initial_mean'])},{r['budget_flag']}"
        )
    return "\n".join(lines) + "\n"


def comparison_table(rows: list[dict]) -> str:
    cols = ["run", "method", "success", "interventions", "flag"]
    body = [
        [
            r["run"],
            r["method"],
            f"{r['success_mean']:.3f}+/-{r['success_stderr']:.3f}",
            f"{r['interventions_mean']:.0f}",
            r["budget_flag"],
        ]
        for r in rows
    ]
    widths = [max(len(str(row[i])) for row in [cols] + body) for i in range(len(cols))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return "\n".join([fmt.format(*cols)] + [fmt.format(*row) for row in body]) + "\n"


# -- intervention prediction study -------------------------------------------------


@dataclass
class PredictionStudy:
    mile_balanced_accuracy: float
    classifier_balanced_accuracy: float
    majority_balanced_accuracy: float
    fresh_interventions: int
    fresh_steps: int


def prediction_study_from_state(
    pipeline: SeedPipeline,
    state,
    lcfg: LossConfig,
    train_records: list,
    seed: int,
    n_fresh_episodes: int = 10,
    clf_cfg: BCConfig | None = None,
) -> PredictionStudy:
    """Score intervention predictors on fresh deployments of the trained policy.

    The model-based predictor (trained policy + mental model through the
    gate), a standalone classifier fitted on the training-run records, and the
    majority rule are all evaluated on episodes the predictors never saw.
    """
    from ..datastore import Dataset

    fresh = [
        rec
        for ep in run_deployment(
            pipeline.env, state.policy, pipeline.human, n_fresh_episodes,
            int(rng_for(seed, "fresh-deploy").integers(2**31)), iteration=10_000,
        )
        for rec in ep
    ]
    nu_true = np.array([r.nu for r in fresh])
    obs = np.array([r.obs for r in fresh])

    nu_hat = predict_nu(state, obs, lcfg, seed=seed)
    mile_bal = balanced_accuracy(nu_true, (nu_hat >= 0.5).astype(int))

    clf = train_intervention_classifier(
        Dataset(train_records),
        clf_cfg or BCConfig(epochs=60, lr=1e-3),
        seed=seed,
    )
    clf_pred = clf.policy.dist(obs).probs.argmax(axis=1)
    clf_bal = balanced_accuracy(nu_true, clf_pred)

    maj = majority_predictor(Dataset(train_records))
    maj_bal = balanced_accuracy(nu_true, maj.predict(len(fresh)))

    return PredictionStudy(
        mile_balanced_accuracy=mile_bal,
        classifier_balanced_accuracy=clf_bal,
        majority_balanced_accuracy=maj_bal,
        fresh_interventions=int(nu_true.sum()),
        fresh_steps=len(fresh),
    )


def intervention_prediction_study(
    cfg: ExperimentConfig, seed: int, n_fresh_episodes: int = 10
) -> PredictionStudy:
    """Self-contained variant: trains the run, then scores the predictors."""
    import tempfile

    pipeline = build_pipeline(cfg, seed)
    lcfg = loss_config(cfg, pipeline.human)
    with tempfile.TemporaryDirectory() as tmp:
        store = EpisodeStore(tmp)
        state, _ = run_mile(
            pipeline.env, pipeline.initial_policy, pipeline.human, pipeline.mental_model,
            lcfg, cfg.iterations, cfg.episodes_per_iteration, seed,
            store=store, eval_episodes=cfg.eval_episodes,
        )
        train_records = list(store.load_dataset())
    return prediction_study_from_state(
        pipeline, state, lcfg, train_records, seed, n_fresh_episodes,
        clf_cfg=BCConfig(epochs=cfg.initial.bc_epochs, lr=cfg.initial.bc_lr),
    )
