import json

import numpy as np
import pytest

from apprentice_drive import cli

FAST = (
    "demos.n_total = 12\n"
    "demos.n_bad = 3\n"
    "train.episodes = 3\n"
    "train.memory_size = 100\n"
    "train.minibatch = 16\n"
    "train.hidden = 8\n"
    "train.iterations = 2\n"
    "train.batch_trajectories = 3\n"
    "eval.n_episodes = 2\n"
)


@pytest.fixture
def fast_config(tmp_path):
    path = tmp_path / "fast.txt"
    path.write_text(FAST)
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_pipeline_populates_run_dir(tmp_path, fast_config):
    out = tmp_path / "out"
    assert run("pipeline", "--seed", 7, "--run-dir", out, "--config", fast_config, "-q") == 0
    for name in ("demos.csv", "expert_policy.json", "girl_result.json", "learning_curve.csv", "eval_metrics.json", "resolved_config.txt", "eval_steps.csv"):
        assert (out / name).exists(), name
    assert (out / "checkpoints" / "final.json").exists()
    assert {p.name for p in (out / "plots").iterdir()} >= {"distance_velocity.csv", "distance_acceleration.csv", "reference_lines.csv"}
    resolved = (out / "resolved_config.txt").read_text()
    assert "demos.n_total = 12" in resolved and "# seed = 7" in resolved


def test_stages_individually_and_reinforce(tmp_path, fast_config):
    d = tmp_path / "r"
    common = ["--run-dir", d, "--config", fast_config, "--seed", 3, "-q"]
    for stage in ("gen-demos", "fit-expert", "recover-reward"):
        assert run(stage, *common) == 0
    assert run("train", *common, "--algo", "reinforce") == 0
    assert run("evaluate", *common) == 0
    assert run("export-plots", *common) == 0
    metrics = json.loads((d / "eval_metrics.json").read_text())
    assert metrics["aggregate"]["n_episodes"] == 2


def test_train_without_weights_exits_2(tmp_path, fast_config, capsys):
    assert run("train", "--run-dir", tmp_path, "--config", fast_config, "-q") == 2
    assert "recover-reward" in capsys.readouterr().err


def test_train_with_omega_override(tmp_path, fast_config):
    assert run("train", "--run-dir", tmp_path, "--config", fast_config, "--omega", "0.5,0.3,0.2", "-q") == 0
    assert (tmp_path / "learning_curve.csv").exists()
    assert run("train", "--run-dir", tmp_path, "--config", fast_config, "--omega", "0.5,0.6,0.2", "-q") == 2
    assert run("train", "--run-dir", tmp_path, "--config", fast_config, "--omega", "a,b", "-q") == 2


def test_usage_and_config_errors(tmp_path, capsys):
    assert run("bogus") == 2
    assert "usage" in capsys.readouterr().err
    assert run() == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("road.nope = 3\n")
    assert run("gen-demos", "--run-dir", tmp_path, "--config", bad) == 2
    assert run("gen-demos", "--run-dir", tmp_path, "--config", tmp_path / "missing.txt") == 2


def test_missing_upstream_artifacts_exit_2(tmp_path):
    for stage in ("fit-expert", "recover-reward", "evaluate", "export-plots"):
        assert run(stage, "--run-dir", tmp_path / stage, "-q") == 2


def test_runtime_failures_exit_1(tmp_path, fast_config, monkeypatch):
    d = tmp_path / "r"
    assert run("gen-demos", "--run-dir", d, "--config", fast_config, "-q") == 0
    (d / "demos.csv").write_text("not,a,dataset\n")
    assert run("fit-expert", "--run-dir", d, "--config", fast_config, "-q") == 1

    def explode(*args, **kwargs):
        raise FloatingPointError("injected")

    monkeypatch.setattr(cli, "train", explode)
    assert run("train", "--run-dir", d, "--omega", "1,0,0", "--config", fast_config, "-q") == 1

    (d / "checkpoints").mkdir(exist_ok=True)
    (d / "checkpoints" / "final.json").write_text("{}")
    assert run("evaluate", "--run-dir", d, "--config", fast_config, "-q") == 1


def test_seed_determinism_of_girl_result(tmp_path, fast_config):
    for name in ("a", "b"):
        for stage in ("gen-demos", "fit-expert", "recover-reward"):
            assert run(stage, "--run-dir", tmp_path / name, "--config", fast_config, "--seed", 7, "-q") == 0
    assert (tmp_path / "a" / "girl_result.json").read_bytes() == (tmp_path / "b" / "girl_result.json").read_bytes()
    omega = np.array(json.loads((tmp_path / "a" / "girl_result.json").read_text())["omega"])
    assert abs(omega.sum() - 1) <= 1e-9
