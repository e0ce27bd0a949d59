"""Post-training evaluation on randomized start speeds and road lengths, and plot-data export."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .config import KMH, EvalConfig, FeatureConfig, RoadConfig, SimConfig, VehicleParams
from .demos import expert_action
from .features import reward_feature_matrix
from .sim import Terminal, observe, reset, step

STEP_COLUMNS = (
    "episode_id",
    "step",
    "time_s",
    "position_m",
    "velocity_mps",
    "accel_mps2",
    "applied_action",
    "d_stop_m",
    "speed_limit_mps",
    "road_length_m",
    "initial_velocity_mps",
    "terminal",
)


@dataclass
class EpisodeTrace:
    """States ``0..T`` of one evaluation episode; ``actions[k]`` produced state ``k`` (0 for the start)."""

    episode_id: int
    road_length: float
    speed_limit: float
    initial_velocity: float
    dt: float
    position: np.ndarray
    velocity: np.ndarray
    accel: np.ndarray
    actions: np.ndarray
    terminal: Terminal

    @property
    def n_steps(self) -> int:
        return len(self.position) - 1

    @property
    def d_stop(self) -> np.ndarray:
        return self.road_length - self.position


@dataclass
class EpisodeMetrics:
    episode_id: int
    initial_velocity: float
    road_length: float
    terminal: str
    stop_gap: float
    crossed: bool
    max_speed_excess: float
    max_abs_accel: float
    undiscounted_return: float | None
    success: bool


def classify(trace: EpisodeTrace, config: EvalConfig = EvalConfig(), omega=None, features: FeatureConfig = FeatureConfig()) -> EpisodeMetrics:
    """Success verdict and metrics; a pure function of the recorded trace."""
    stop_gap = float(trace.d_stop[-1])
    crossed = trace.terminal is Terminal.CROSSED_SIGN or stop_gap < 0
    times = np.arange(len(trace.position)) * trace.dt
    window = times >= config.settle_time if trace.initial_velocity > trace.speed_limit else np.ones_like(times, bool)
    excess = trace.velocity[window] - trace.speed_limit
    max_excess = max(0.0, float(excess.max())) if excess.size else 0.0
    max_accel = float(np.max(np.abs(trace.accel[1:]))) if trace.n_steps else 0.0
    ret = None
    if omega is not None:
        psi = reward_feature_matrix(trace.velocity[1:], trace.d_stop[1:], trace.speed_limit, trace.accel[1:], features)
        ret = float(np.sum(psi @ np.asarray(omega, dtype=float)))
    success = (
        trace.terminal is Terminal.STOPPED
        and 0.0 <= stop_gap <= config.stop_gap_max
        and max_excess <= config.speed_excess_max
        and max_accel <= config.accel_max
    )
    return EpisodeMetrics(
        trace.episode_id,
        trace.initial_velocity,
        trace.road_length,
        trace.terminal.value,
        stop_gap,
        crossed,
        max_excess,
        max_accel,
        ret,
        bool(success),
    )


def run_episode(
    controller,
    episode_id: int,
    initial_velocity: float,
    road: RoadConfig,
    params: VehicleParams = VehicleParams(),
    sim: SimConfig = SimConfig(),
) -> EpisodeTrace:
    """Roll out a deterministic controller ``obs -> action``."""
    state = reset(road, initial_velocity)
    pos, vel, acc, act = [state.position], [state.velocity], [0.0], [0.0]
    while True:
        result = step(state, controller(observe(state, road)), params, road, sim)
        state = result.next_state
        pos.append(state.position)
        vel.append(state.velocity)
        acc.append(state.accel)
        act.append(state.prev_action)
        if result.terminal.done:
            break
    return EpisodeTrace(
        episode_id,
        road.length,
        road.speed_limit,
        initial_velocity,
        sim.dt,
        np.array(pos),
        np.array(vel),
        np.array(acc),
        np.array(act),
        result.terminal,
    )


def sample_conditions(config: EvalConfig, seed: int) -> list[tuple[float, float]]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(config.n_episodes):
        v0 = rng.uniform(config.v0_min_kmh, config.v0_max_kmh) * KMH
        length = float(config.road_lengths[rng.integers(len(config.road_lengths))])
        out.append((v0, length))
    return out


def aggregate(metrics: list[EpisodeMetrics]) -> dict:
    if not metrics:
        raise ValueError("no episodes to aggregate")
    stopped = [m.stop_gap for m in metrics if m.terminal == Terminal.STOPPED.value]
    returns = [m.undiscounted_return for m in metrics if m.undiscounted_return is not None]
    return {
        "n_episodes": len(metrics),
        "success_rate": sum(m.success for m in metrics) / len(metrics),
        "n_crossed": sum(m.crossed for m in metrics),
        "n_stopped": len(stopped),
        "mean_stop_gap": float(np.mean(stopped)) if stopped else None,
        "worst_stop_gap": float(max(stopped, key=abs)) if stopped else None,
        "mean_max_speed_excess": float(np.mean([m.max_speed_excess for m in metrics])),
        "worst_speed_excess": max(m.max_speed_excess for m in metrics),
        "mean_max_abs_accel": float(np.mean([m.max_abs_accel for m in metrics])),
        "worst_abs_accel": max(m.max_abs_accel for m in metrics),
        "mean_return": float(np.mean(returns)) if returns else None,
    }


@dataclass
class EvalResult:
    traces: list[EpisodeTrace]
    metrics: list[EpisodeMetrics]
    summary: dict


def evaluate(
    policy,
    config: EvalConfig = EvalConfig(),
    seed: int = 0,
    params: VehicleParams = VehicleParams(),
    speed_limit: float = RoadConfig().speed_limit,
    sim: SimConfig = SimConfig(),
    features: FeatureConfig = FeatureConfig(),
    omega=None,
) -> EvalResult:
    """Deterministic evaluation: the policy's mean action, no exploration noise."""
    traces, metrics = [], []
    for i, (v0, length) in enumerate(sample_conditions(config, seed)):
        road = RoadConfig(length=length, speed_limit=speed_limit)
        trace = run_episode(lambda obs: policy.mean_action(obs, features), i, v0, road, params, sim)
        traces.append(trace)
        metrics.append(classify(trace, config, omega, features))
    return EvalResult(traces, metrics, aggregate(metrics))


def write_eval(run_dir: str | Path, result: EvalResult, extra: dict | None = None) -> None:
    run_dir = Path(run_dir)
    write_traces_csv(run_dir / "eval_steps.csv", result.traces)
    record = {**(extra or {}), "aggregate": result.summary, "episodes": [asdict(m) for m in result.metrics]}
    (run_dir / "eval_metrics.json").write_text(json.dumps(record, indent=2) + "\n")


def write_traces_csv(path: str | Path, traces: list[EpisodeTrace]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STEP_COLUMNS)
        for tr in traces:
            for k in range(len(tr.position)):
                writer.writerow(
                    [
                        tr.episode_id,
                        k,
                        repr(k * tr.dt),
                        repr(float(tr.position[k])),
                        repr(float(tr.velocity[k])),
                        repr(float(tr.accel[k])),
                        repr(float(tr.actions[k])),
                        repr(float(tr.road_length - tr.position[k])),
                        repr(tr.speed_limit),
                        repr(tr.road_length),
                        repr(tr.initial_velocity),
                        tr.terminal.value if k == len(tr.position) - 1 else Terminal.RUNNING.value,
                    ]
                )


def read_traces_csv(path: str | Path, dt: float = SimConfig().dt) -> list[EpisodeTrace]:
    rows: dict[int, list[dict]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != STEP_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            rows.setdefault(int(row["episode_id"]), []).append(row)
    traces = []
    for ep_id in sorted(rows):
        ep = sorted(rows[ep_id], key=lambda r: int(r["step"]))
        col = lambda name: np.array([float(r[name]) for r in ep])  # noqa: E731
        traces.append(
            EpisodeTrace(
                ep_id,
                float(ep[0]["road_length_m"]),
                float(ep[0]["speed_limit_mps"]),
                float(ep[0]["initial_velocity_mps"]),
                dt,
                col("position_m"),
                col("velocity_mps"),
                col("accel_mps2"),
                col("applied_action"),
                Terminal(ep[-1]["terminal"]),
            )
        )
    return traces


def reference_trajectory(
    initial_velocity: float = 60.0 * KMH,
    road: RoadConfig = RoadConfig(),
    params: VehicleParams = VehicleParams(),
    sim: SimConfig = SimConfig(),
) -> EpisodeTrace:
    """Noise-free scripted expert run, exported as the plots' reference curve."""
    return run_episode(expert_action, -1, initial_velocity, road, params, sim)


def export_plot_data(run_dir: str | Path, accel_limit: float = EvalConfig().accel_max, reference: EpisodeTrace | None = None) -> list[Path]:
    """Write distance-velocity and distance-acceleration series plus overlay lines."""
    run_dir = Path(run_dir)
    steps_path = run_dir / "eval_steps.csv"
    if not steps_path.exists():
        raise FileNotFoundError(f"{steps_path} not found; run the evaluation first")
    traces = read_traces_csv(steps_path)
    if not traces:
        raise ValueError(f"{steps_path} holds no evaluation records")
    plots = run_dir / "plots"
    plots.mkdir(exist_ok=True)

    velocity_path = plots / "distance_velocity.csv"
    accel_path = plots / "distance_acceleration.csv"
    with open(velocity_path, "w", newline="") as fv, open(accel_path, "w", newline="") as fa:
        wv = csv.writer(fv, lineterminator="\n")
        wa = csv.writer(fa, lineterminator="\n")
        wv.writerow(("distance_from_start_m", "velocity_mps", "episode_id"))
        wa.writerow(("distance_from_start_m", "accel_mps2", "episode_id"))
        for tr in traces:
            for k in range(1, len(tr.position)):
                wv.writerow((repr(float(tr.position[k])), repr(float(tr.velocity[k])), tr.episode_id))
                wa.writerow((repr(float(tr.position[k])), repr(float(tr.accel[k])), tr.episode_id))

    lines_path = plots / "reference_lines.csv"
    with open(lines_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("quantity", "value"))
        for limit in sorted({tr.speed_limit for tr in traces}):
            writer.writerow(("speed_limit_mps", repr(limit)))
        writer.writerow(("accel_upper_mps2", repr(accel_limit)))
        writer.writerow(("accel_lower_mps2", repr(-accel_limit)))

    ref = reference if reference is not None else reference_trajectory()
    ref_path = plots / "reference_trajectory.csv"
    with open(ref_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("source", "distance_from_start_m", "velocity_mps", "accel_mps2"))
        for k in range(len(ref.position)):
            writer.writerow(("scripted_expert", repr(float(ref.position[k])), repr(float(ref.velocity[k])), repr(float(ref.accel[k]))))
    return [velocity_path, accel_path, lines_path, ref_path]
