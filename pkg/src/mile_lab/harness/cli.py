"""The mile-lab command line interface."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .config import ConfigError, ExperimentConfig
from .runner import (
    CompareError,
    build_env,
    build_pipeline,
    compare_runs,
    comparison_csv,
    comparison_table,
    evaluate_checkpoint,
    run_experiment,
    runs_root,
)


@click.group()
def main():
    """Desk-scale intervention-learning experiments."""


def _load_config(config_path: str, overrides: tuple[str, ...], seed: int | None):
    ov = list(overrides)
    if seed is not None:
        ov.append(f"run.seeds={seed}")
    try:
        cfg = ExperimentConfig.from_toml(config_path, ov)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc
    if seed is not None:
        cfg.seeds = [seed]
        cfg.raw.setdefault("run", {})["seeds"] = [seed]
    return cfg


@main.command()
@click.argument("config_path", type=click.Path())
@click.option("--seed", type=int, default=None, help="Run a single seed instead of run.seeds.")
@click.option("--out", "out_root", default=None, help="Output root (default MILE_RUNS_DIR or ./runs).")
@click.option("--run-id", default=None, help="Run directory name (default: config stem + method).")
@click.option("--set", "overrides", multiple=True, help="Override config fields, e.g. --set run.iterations=5.")
@click.option("--workers", type=int, default=1, show_default=True, help="Parallel seed workers.")
def run(config_path, seed, out_root, run_id, overrides, workers):
    """Execute a configured experiment end to end."""
    cfg = _load_config(config_path, overrides, seed)
    rid = run_id or f"{Path(config_path).stem}-{cfg.method}"
    run_dir = runs_root(out_root) / rid
    try:
        result = run_experiment(cfg, run_dir, workers=workers)
    except Exception as exc:
        click.echo(f"run failed: {exc}", err=True)
        sys.exit(1)
    click.echo(f"run dir: {result.run_dir}")
    click.echo(
        f"final success over {len(result.seed_results)} seed(s): "
        f"{result.final_mean:.3f} +/- {result.final_stderr:.3f}"
    )


@main.command()
@click.argument("config_path", type=click.Path())
@click.option("--out", "out_path", default=None, help="Where to write the solved Q-table values.")
def solve_expert(config_path, out_path):
    """Solve or verify the expert for the configured environment."""
    cfg = _load_config(config_path, (), None)
    if cfg.env_kind == "gridnav":
        from ..envs import value_iteration

        qt = value_iteration(cfg.env_spec)
        click.echo(f"value iteration residual: {qt.residual():.2e}")
        if out_path:
            import numpy as np

            np.save(out_path, qt.q)
            click.echo(f"Q-table saved to {out_path}")
    else:
        from ..envs import ReachGap2DEnv, expert_action_mean
        from ..rollout import success_rate

        env = build_env(cfg)
        rate = success_rate(env, lambda obs, rng: expert_action_mean(cfg.env_spec, obs[:2]), 100, 0)
        click.echo(f"noiseless scripted expert success: {rate:.2f}")


@main.command()
@click.argument("config_path", type=click.Path())
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_path", default=None, help="Checkpoint path prefix for the policy.")
def init_policy(config_path, seed, out_path):
    """Build the suboptimal initial policy and report its success rate."""
    cfg = _load_config(config_path, (), None)
    try:
        pipeline = build_pipeline(cfg, seed)
    except Exception as exc:
        click.echo(f"init-policy failed: {exc}", err=True)
        sys.exit(1)
    click.echo(f"initial policy success: {pipeline.initial_success:.3f}")
    if out_path:
        from ..diffnet import save_params

        save_params(out_path, pipeline.initial_policy.spec, pipeline.initial_policy.params)
        click.echo(f"saved to {out_path}.bin/.json")


@main.command()
@click.argument("config_path", type=click.Path())
@click.option("--seed", type=int, required=True)
def calibrate_c(config_path, seed):
    """Calibrate the effort cost c to the configured intervention-rate target."""
    cfg = _load_config(config_path, ("human.c=calibrate",), None)
    try:
        pipeline = build_pipeline(cfg, seed)
    except Exception as exc:
        click.echo(f"calibration failed: {exc}", err=True)
        sys.exit(1)
    click.echo(f"c = {pipeline.c:.4f} (achieved rate {pipeline.achieved_rate:.3f})")


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(), help="Policy checkpoint path prefix.")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--episodes", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def eval(checkpoint, config_path, episodes, seed):
    """Interventions-disabled success rate of a saved policy."""
    cfg = _load_config(config_path, (), None)
    try:
        rate = evaluate_checkpoint(cfg, checkpoint, episodes, seed)
    except Exception as exc:
        click.echo(f"eval failed: {exc}", err=True)
        sys.exit(1)
    click.echo(f"success rate: {rate:.3f}")


@main.command()
@click.argument("run_dirs", nargs=-1, required=True, type=click.Path())
@click.option("--out", "out_csv", default=None, help="Also write the comparison CSV here.")
def compare(run_dirs, out_csv):
    """Compare finished runs that share an environment and budget."""
    try:
        rows = compare_runs(list(run_dirs))
    except (CompareError, FileNotFoundError, ValueError) as exc:
        click.echo(f"compare failed: {exc}", err=True)
        sys.exit(1)
    click.echo(comparison_table(rows), nl=False)
    if out_csv:
        Path(out_csv).write_text(comparison_csv(rows))
        click.echo(f"comparison CSV written to {out_csv}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--checkpoint", default=None, type=click.Path(),
              help="Policy checkpoint prefix; defaults to a fresh initial policy.")
@click.option("--port", type=int, default=8700, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--tick-hz", type=float, default=10.0, show_default=True)
@click.option("--ui-dir", default=None, type=click.Path(), help="Static UI assets directory.")
@click.option("--seed", type=int, default=0, show_default=True)
def serve(config_path, checkpoint, port, host, tick_hz, ui_dir, seed):
    """Serve a live human-in-the-loop session over WebSocket."""
    cfg = _load_config(config_path, (), None)
    from ..live.server import serve_forever

    try:
        serve_forever(
            cfg, checkpoint=checkpoint, host=host, port=port, tick_hz=tick_hz,
            ui_dir=ui_dir, seed=seed,
        )
    except Exception as exc:
        click.echo(f"serve failed: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
