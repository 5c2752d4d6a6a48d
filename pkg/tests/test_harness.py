import json
from pathlib import Path

import numpy as np
import pytest

from mile_lab.harness import ConfigError, ExperimentConfig, compare_runs, run_experiment
from mile_lab.harness.runner import comparison_csv, comparison_table, evaluate_checkpoint

SMALL_MAP = """
S . . .
. # . .
. . H .
. . . G
"""

BASE = {
    "env": {"kind": "gridnav", "map": SMALL_MAP, "horizon": 24},
    "method": {"name": "mile"},
    "run": {"seeds": [0, 1], "iterations": 1, "episodes_per_iteration": 3, "eval_episodes": 20},
    "human": {"sigma": 1.0, "c": 1.5, "temperature": 0.02, "mental_rollouts": 12},
    "initial_policy": {
        "corruption": 0.25, "teacher_episodes": 25, "bc_epochs": 8, "band": "off",
    },
    "training": {"epochs": 4, "lr": 2e-4},
}


def config(**changes):
    import copy

    raw = copy.deepcopy(BASE)
    for path, value in changes.items():
        node = raw
        parts = path.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return ExperimentConfig.from_dict(raw)


class TestConfig:
    def test_toml_round_trip(self, tmp_path):
        toml_text = """
[env]
kind = "gridnav"
horizon = 24
map = '''
S . G
. . .
'''

[method]
name = "mile"

[run]
seeds = [0]
iterations = 2
episodes_per_iteration = 1

[human]
c = "calibrate"
sigma = 2.0
"""
        path = tmp_path / "exp.toml"
        path.write_text(toml_text)
        cfg = ExperimentConfig.from_toml(path)
        assert cfg.env_kind == "gridnav"
        assert cfg.human.c is None  # calibrate
        assert cfg.human.sigma == 2.0
        assert cfg.iterations == 2

    def test_override_applies(self, tmp_path):
        path = tmp_path / "exp.toml"
        path.write_text(
            '[env]\nkind = "gridnav"\nmap = "S G"\n[run]\nseeds = [0]\n'
        )
        cfg = ExperimentConfig.from_toml(path, ["run.iterations=7", "training.lr=0.001"])
        assert cfg.iterations == 7
        assert cfg.training.lr == 0.001

    def test_unknown_method_rejected(self):
        with pytest.raises(ConfigError, match="method.name"):
            config(**{"method.name": "rlif"})

    def test_unknown_env_rejected(self):
        with pytest.raises(ConfigError, match="env.kind"):
            config(**{"env.kind": "metaworld"})

    def test_empty_seeds_rejected(self):
        with pytest.raises(ConfigError, match="run.seeds"):
            config(**{"run.seeds": []})

    def test_bad_lambda_rejected(self):
        with pytest.raises(ConfigError, match="lambda"):
            config(**{"training.lambda": 1.5})

    def test_bad_map_rejected(self):
        with pytest.raises(ConfigError, match="env"):
            config(**{"env.map": "S . .\n. . ."})  # no goal


class TestRunExperiment:
    @pytest.fixture(scope="class")
    def mile_run(self, tmp_path_factory):
        run_dir = tmp_path_factory.mktemp("runs") / "mile"
        cfg = config()
        result = run_experiment(cfg, run_dir)
        return cfg, result

    def test_outputs_exist(self, mile_run):
        _, result = mile_run
        d = result.run_dir
        assert (d / "metrics.csv").exists()
        assert (d / "manifest.json").exists()
        assert (d / "summary.csv").exists()
        for seed in (0, 1):
            assert (d / f"seed_{seed}" / "iter_0.jsonl").exists()
            assert (d / f"seed_{seed}" / "checkpoints" / "final" / "policy.bin").exists()

    def test_metrics_rows_per_seed_and_iteration(self, mile_run):
        _, result = mile_run
        lines = (result.run_dir / "metrics.csv").read_text().strip().splitlines()
        assert lines[0] == "iter,episodes,interventions,intervention_rate,loss,success_rate,seed"
        assert len(lines) == 1 + 2  # one iteration x two seeds

    def test_rerun_reproduces_csv_byte_for_byte(self, mile_run, tmp_path):
        cfg, result = mile_run
        rerun_dir = tmp_path / "again"
        run_experiment(cfg, rerun_dir)
        assert (rerun_dir / "metrics.csv").read_bytes() == (
            result.run_dir / "metrics.csv"
        ).read_bytes()

    def test_eval_checkpoint_deterministic(self, mile_run):
        cfg, result = mile_run
        ckpt = result.run_dir / "seed_0" / "checkpoints" / "final" / "policy"
        a = evaluate_checkpoint(cfg, ckpt, episodes=20, seed=3)
        b = evaluate_checkpoint(cfg, ckpt, episodes=20, seed=3)
        assert a == b

    def test_manifest_carries_config_hash(self, mile_run):
        _, result = mile_run
        manifest = json.loads((result.run_dir / "manifest.json").read_text())
        from mile_lab.datastore import config_hash

        assert manifest["config_hash"] == config_hash(manifest["config"])


class TestCompare:
    @pytest.fixture(scope="class")
    def two_runs(self, tmp_path_factory):
        root = tmp_path_factory.mktemp("cmp")
        cfg_m = config()
        run_experiment(cfg_m, root / "mile")
        cfg_b = config(**{"method.name": "hg_dagger", "run.intervention_budget": 5})
        run_experiment(cfg_b, root / "hg")
        return root

    def test_table_lists_methods(self, two_runs):
        rows = compare_runs([two_runs / "mile", two_runs / "hg"])
        assert {r["method"] for r in rows} == {"mile", "hg_dagger"}
        text = comparison_table(rows)
        assert "mile" in text and "hg_dagger" in text
        csv = comparison_csv(rows)
        assert csv.startswith("run,method,env")

    def test_single_run_table(self, two_runs):
        rows = compare_runs([two_runs / "mile"])
        assert len(rows) == 1

    def test_cross_env_comparison_refused(self, two_runs, tmp_path):
        cfg_r = config(**{"env.kind": "reachgap"})
        cfg_r.raw["env"] = {"kind": "reachgap", "horizon": 40}
        cfg_r = ExperimentConfig.from_dict(cfg_r.raw)
        run_experiment(
            ExperimentConfig.from_dict(
                {
                    **cfg_r.raw,
                    "run": {"seeds": [0], "iterations": 1, "episodes_per_iteration": 1,
                            "eval_episodes": 5},
                    "initial_policy": {"corruption": 0.3, "teacher_episodes": 10,
                                       "bc_epochs": 4, "band": "off"},
                    "human": {"c": 50.0, "sigma": 20.0},
                    "training": {"epochs": 2, "lr": 1e-4},
                }
            ),
            tmp_path / "reach",
        )
        from mile_lab.harness.runner import CompareError

        with pytest.raises(CompareError, match="different environments"):
            compare_runs([two_runs / "mile", tmp_path / "reach"])


class TestCli:
    def test_run_and_eval_and_compare(self, tmp_path):
        from click.testing import CliRunner

        from mile_lab.harness.cli import main

        cfg_path = tmp_path / "exp.toml"
        cfg_path.write_text(
            f"""
[env]
kind = "gridnav"
horizon = 24
map = '''{SMALL_MAP}'''

[method]
name = "mile"

[run]
seeds = [0]
iterations = 1
episodes_per_iteration = 2
eval_episodes = 10

[human]
c = 1.5
temperature = 0.02
mental_rollouts = 10

[initial_policy]
corruption = 0.25
teacher_episodes = 15
bc_epochs = 5
band = "off"

[training]
epochs = 3
lr = 2e-4
"""
        )
        runner = CliRunner()
        res = runner.invoke(
            main, ["run", str(cfg_path), "--out", str(tmp_path / "runs"), "--run-id", "t"]
        )
        assert res.exit_code == 0, res.output
        assert "final success" in res.output

        ckpt = tmp_path / "runs" / "t" / "seed_0" / "checkpoints" / "final" / "policy"
        res = runner.invoke(
            main,
            ["eval", "--checkpoint", str(ckpt), "--config", str(cfg_path),
             "--episodes", "10", "--seed", "1"],
        )
        assert res.exit_code == 0, res.output
        assert "success rate" in res.output

        res = runner.invoke(main, ["compare", str(tmp_path / "runs" / "t")])
        assert res.exit_code == 0, res.output

    def test_unknown_method_exits_2(self, tmp_path):
        from click.testing import CliRunner

        from mile_lab.harness.cli import main

        cfg_path = tmp_path / "exp.toml"
        cfg_path.write_text(
            '[env]\nkind = "gridnav"\nmap = "S G"\n[method]\nname = "dqn"\n[run]\nseeds = [0]\n'
        )
        res = CliRunner().invoke(main, ["run", str(cfg_path)])
        assert res.exit_code == 2

    def test_missing_config_exits_2(self):
        from click.testing import CliRunner

        from mile_lab.harness.cli import main

        res = CliRunner().invoke(main, ["run", "/nonexistent/exp.toml"])
        assert res.exit_code == 2
