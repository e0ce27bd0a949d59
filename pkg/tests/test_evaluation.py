import csv
import json

import numpy as np
import pytest

from apprentice_drive.config import KMH, EvalConfig, RoadConfig
from apprentice_drive.evaluation import (
    aggregate,
    classify,
    evaluate,
    export_plot_data,
    read_traces_csv,
    run_episode,
    write_eval,
)
from apprentice_drive.sim import Terminal
from apprentice_drive.trainers.run import load_policy, save_linear_checkpoint


class Constant:
    def __init__(self, a):
        self.a = a

    def mean_action(self, obs, features=None):
        return self.a


def test_full_brake_stops_far_from_sign():
    trace = run_episode(lambda obs: -1.0, 0, 30 * KMH, RoadConfig(length=300.0))
    m = classify(trace)
    assert trace.terminal is Terminal.STOPPED
    assert m.stop_gap > 250 and not m.success


def test_full_pedal_crosses():
    result = evaluate(Constant(1.0), EvalConfig(n_episodes=3))
    assert all(m.crossed and not m.success for m in result.metrics)
    assert result.summary["n_crossed"] == 3 and result.summary["success_rate"] == 0.0


def test_expert_like_policy_can_succeed(expert):
    result = evaluate(expert, EvalConfig(n_episodes=8), seed=2, omega=[0.5512, 0.1562, 0.2926])
    assert 0.0 <= result.summary["success_rate"] <= 1.0
    assert all(m.undiscounted_return is not None and m.undiscounted_return <= 0 for m in result.metrics)


def test_success_rule_boundaries():
    trace = run_episode(lambda obs: -1.0, 0, 30 * KMH, RoadConfig(length=300.0))
    lenient = EvalConfig(stop_gap_max=1000.0, accel_max=100.0)
    assert classify(trace, lenient).success
    strict_accel = EvalConfig(stop_gap_max=1000.0)
    assert not classify(trace, strict_accel).success


def test_settling_window_only_when_starting_fast():
    road = RoadConfig(length=500.0)
    fast = run_episode(lambda obs: -0.3 if obs.velocity > obs.speed_limit - 0.5 else 0.2, 0, 70 * KMH, road)
    m = classify(fast, EvalConfig())
    excess_all = max(0.0, float(np.max(fast.velocity - fast.speed_limit)))
    assert excess_all > 1.0 and m.max_speed_excess < excess_all


def test_deterministic_and_seeded(expert):
    a = evaluate(expert, EvalConfig(n_episodes=4), seed=1)
    b = evaluate(expert, EvalConfig(n_episodes=4), seed=1)
    c = evaluate(expert, EvalConfig(n_episodes=4), seed=2)
    assert a.summary == b.summary
    assert [m.initial_velocity for m in a.metrics] != [m.initial_velocity for m in c.metrics]
    for m in a.metrics:
        assert 30 * KMH <= m.initial_velocity <= 70 * KMH and m.road_length in (200, 300, 400, 500)


def test_persisted_records_reproduce_verdicts(tmp_path, expert):
    omega = [0.5512, 0.1562, 0.2926]
    result = evaluate(expert, EvalConfig(n_episodes=6), seed=3, omega=omega)
    write_eval(tmp_path, result)
    saved = json.loads((tmp_path / "eval_metrics.json").read_text())
    traces = read_traces_csv(tmp_path / "eval_steps.csv")
    again = [classify(t, EvalConfig(), omega) for t in traces]
    for m, rec in zip(again, saved["episodes"]):
        assert m.success == rec["success"]
        assert m.stop_gap == rec["stop_gap"]
        assert m.max_abs_accel == rec["max_abs_accel"]
        assert m.undiscounted_return == pytest.approx(rec["undiscounted_return"], rel=1e-12)
    assert aggregate(again) == pytest.approx(saved["aggregate"])


def test_export_plot_data(tmp_path):
    trace = run_episode(lambda obs: 1.0, 0, 16.667, RoadConfig(length=60.0))
    from apprentice_drive.evaluation import EvalResult

    write_eval(tmp_path, EvalResult([trace], [classify(trace)], aggregate([classify(trace)])))
    paths = export_plot_data(tmp_path)
    T = trace.n_steps
    for name in ("distance_velocity.csv", "distance_acceleration.csv"):
        rows = list(csv.reader(open(tmp_path / "plots" / name)))
        assert len(rows) - 1 == T
    header = next(csv.reader(open(tmp_path / "plots" / "distance_velocity.csv")))
    assert header == ["distance_from_start_m", "velocity_mps", "episode_id"]
    lines = {(q, round(float(v), 3)) for q, v in list(csv.reader(open(tmp_path / "plots" / "reference_lines.csv")))[1:]}
    assert ("speed_limit_mps", 16.667) in lines
    assert ("accel_upper_mps2", 4.905) in lines and ("accel_lower_mps2", -4.905) in lines
    assert (tmp_path / "plots" / "reference_trajectory.csv").exists() and len(paths) == 4


def test_export_without_records(tmp_path):
    with pytest.raises(FileNotFoundError):
        export_plot_data(tmp_path)


def test_checkpoint_mismatch(tmp_path):
    import json as _json

    from apprentice_drive.nets import Mlp, save_checkpoint

    wrong = Mlp.build([7, 4, 1], ["relu", "tanh"], np.random.default_rng(0))
    save_checkpoint(tmp_path / "a.json", {"actor": wrong}, {"kind": "ddpg", "length_scale": 300.0})
    with pytest.raises(ValueError):
        load_policy(tmp_path / "a.json")
    from apprentice_drive.policy import LinearGaussianPolicy

    save_linear_checkpoint(tmp_path / "l.json", LinearGaussianPolicy(np.zeros(9), 0.1))
    rec = _json.loads((tmp_path / "l.json").read_text())
    rec["policy"]["theta"] = [0.0] * 7
    (tmp_path / "l.json").write_text(_json.dumps(rec))
    with pytest.raises(ValueError):
        load_policy(tmp_path / "l.json")
