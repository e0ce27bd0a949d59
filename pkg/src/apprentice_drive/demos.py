"""Scripted expert, demonstration datasets, and the MLE fit of the expert policy."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .config import KMH, DemoConfig, FeatureConfig, RoadConfig, SimConfig, VehicleParams
from .errors import DegenerateDataError
from .features import N_POLICY_FEATURES, braking_demand, policy_feature_matrix, reward_feature_matrix
from .policy import LinearGaussianPolicy
from .sim import Observation, SimState, Terminal, clamp_action, observe, reset, step

# expert tracking law
COMFORT_DECEL = 2.5
STOP_OFFSET = 2.0
SPEED_MARGIN = 0.3
GAIN = 0.4

MLE_RIDGE = 1e-6
# ridge is numerically lost below this eigenvalue ratio
MIN_EIGEN_RATIO = 1e-15

CSV_COLUMNS = (
    "episode_id",
    "step",
    "label",
    "position_m",
    "velocity_mps",
    "d_stop_m",
    "speed_limit_mps",
    "prev_action",
    "action",
    "realized_accel_mps2",
    "terminal",
)


@dataclass(frozen=True)
class Transition:
    position: float
    obs: Observation
    action: float
    next_obs: Observation
    realized_accel: float
    terminal: Terminal


@dataclass
class Episode:
    transitions: list[Transition]
    label: str = "good"

    @property
    def terminal(self) -> Terminal:
        return self.transitions[-1].terminal

    def __len__(self) -> int:
        return len(self.transitions)

    def arrays(self, cfg: FeatureConfig = FeatureConfig()) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Policy features of each state, actions, reward features of each successor."""
        tr = self.transitions
        phi = policy_feature_matrix(
            [t.obs.velocity for t in tr],
            [t.obs.d_stop for t in tr],
            [t.obs.speed_limit for t in tr],
            [t.obs.prev_action for t in tr],
            cfg,
        )
        actions = np.array([t.action for t in tr])
        psi = reward_feature_matrix(
            [t.next_obs.velocity for t in tr],
            [t.next_obs.d_stop for t in tr],
            [t.next_obs.speed_limit for t in tr],
            [t.realized_accel for t in tr],
            cfg,
        )
        return phi, actions, psi


@dataclass
class TrajectorySet:
    episodes: list[Episode]
    seed: int | None = None

    @property
    def labels(self) -> list[str]:
        return [ep.label for ep in self.episodes]

    @property
    def n_transitions(self) -> int:
        return sum(len(ep) for ep in self.episodes)


def expert_target_speed(d_stop: float, speed_limit: float) -> float:
    return min(speed_limit - SPEED_MARGIN, math.sqrt(2.0 * COMFORT_DECEL * max(0.0, d_stop - STOP_OFFSET)))


def expert_action(obs: Observation) -> float:
    return clamp_action(GAIN * (expert_target_speed(obs.d_stop, obs.speed_limit) - obs.velocity))


class DelayedBrakingExpert:
    """Expert that ignores the stop sign until the braking demand exceeds ``onset``.

    Produces the poorly performing demonstrations: late, harsh braking and
    occasional overshoot.
    """

    def __init__(self, onset: float = 1.3, features: FeatureConfig = FeatureConfig()):
        self.onset = onset
        self.features = features
        self.braking = False

    def __call__(self, obs: Observation) -> float:
        if not self.braking and braking_demand(obs.velocity, obs.d_stop, self.features) > self.onset:
            self.braking = True
        if self.braking:
            return expert_action(obs)
        return clamp_action(GAIN * (obs.speed_limit - SPEED_MARGIN - obs.velocity))


def rollout(
    controller: Callable[[Observation], float],
    initial_velocity: float,
    params: VehicleParams = VehicleParams(),
    road: RoadConfig = RoadConfig(),
    sim: SimConfig = SimConfig(),
    noise: Callable[[], float] | None = None,
    label: str = "good",
) -> Episode:
    """Run one episode; ``noise`` (if given) is added to every commanded action."""
    state = reset(road, initial_velocity)
    transitions = []
    while True:
        obs = observe(state, road)
        action = controller(obs)
        if noise is not None:
            action += noise()
        result = step(state, action, params, road, sim)
        nxt = result.next_state
        transitions.append(
            Transition(state.position, obs, nxt.prev_action, observe(nxt, road), nxt.accel, result.terminal)
        )
        state = nxt
        if result.terminal.done:
            return Episode(transitions, label)


def generate_demos(
    n_total: int = 150,
    n_bad: int = 30,
    seed: int = 0,
    params: VehicleParams = VehicleParams(),
    road: RoadConfig = RoadConfig(),
    sim: SimConfig = SimConfig(),
    demos: DemoConfig = DemoConfig(),
    features: FeatureConfig = FeatureConfig(),
) -> TrajectorySet:
    if n_total < 1 or not 0 <= n_bad <= n_total:
        raise ValueError(f"need 0 <= n_bad <= n_total and n_total >= 1, got n_total={n_total}, n_bad={n_bad}")
    children = np.random.SeedSequence(seed).spawn(n_total + 1)
    bad = set(np.random.default_rng(children[0]).choice(n_total, size=n_bad, replace=False).tolist())

    episodes = []
    for i in range(n_total):
        rng = np.random.default_rng(children[i + 1])
        v0 = rng.uniform(demos.v0_min_kmh, demos.v0_max_kmh) * KMH
        controller = DelayedBrakingExpert(demos.bad_onset_demand, features) if i in bad else expert_action
        jitter = lambda rng=rng: demos.jitter_std * rng.standard_normal()  # noqa: E731
        label = "bad" if i in bad else "good"
        episodes.append(rollout(controller, v0, params, road, sim, jitter, label))
    return TrajectorySet(episodes, seed)


def fit_mle(demos: TrajectorySet, features: FeatureConfig = FeatureConfig(), ridge: float = MLE_RIDGE) -> LinearGaussianPolicy:
    """Maximum-likelihood linear-Gaussian policy (ridge-stabilized least squares)."""
    if demos.n_transitions < N_POLICY_FEATURES:
        raise DegenerateDataError(
            f"need at least {N_POLICY_FEATURES} transitions to fit {N_POLICY_FEATURES} parameters, "
            f"got {demos.n_transitions}"
        )
    phis, actions = [], []
    for ep in demos.episodes:
        phi, a, _ = ep.arrays(features)
        phis.append(phi)
        actions.append(a)
    return fit_linear_gaussian(np.concatenate(phis), np.concatenate(actions), ridge)


def fit_linear_gaussian(phi: np.ndarray, actions: np.ndarray, ridge: float = MLE_RIDGE) -> LinearGaussianPolicy:
    n, k = phi.shape
    if n < k:
        raise DegenerateDataError(f"need at least {k} samples, got {n}")
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(actions))):
        raise DegenerateDataError("non-finite features or actions")
    gram, rhs = _exact_normal_equations(phi, actions)
    gram += ridge * np.eye(k)
    eig = np.linalg.eigvalsh(gram)
    if eig[0] <= MIN_EIGEN_RATIO * eig[-1]:
        raise DegenerateDataError("policy feature matrix is rank deficient beyond ridge rescue")
    theta = np.linalg.solve(gram, rhs)
    residual = actions - phi @ theta
    return LinearGaussianPolicy(theta, math.sqrt(float(np.mean(residual**2))))


def _exact_normal_equations(phi: np.ndarray, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``phi.T @ phi`` and ``phi.T @ actions`` with correctly rounded sums.

    Rounding then no longer depends on row order, so the fit is invariant to
    the order of episodes even along directions only the ridge pins down.
    """
    k = phi.shape[1]
    gram = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            gram[i, j] = gram[j, i] = math.fsum(phi[:, i] * phi[:, j])
    rhs = np.array([math.fsum(phi[:, i] * actions) for i in range(k)])
    return gram, rhs


@dataclass
class ValidationReport:
    brakes_near_sign: bool
    terminal: Terminal
    final_d_stop: float
    actions: list[float] = field(default_factory=list, repr=False)

    @property
    def good(self) -> bool:
        return self.brakes_near_sign


def validate_features(
    policy: LinearGaussianPolicy,
    params: VehicleParams = VehicleParams(),
    road: RoadConfig = RoadConfig(),
    sim: SimConfig = SimConfig(),
    features: FeatureConfig = FeatureConfig(),
    initial_velocity: float = 60.0 * KMH,
    near: float = 60.0,
) -> ValidationReport:
    """Deterministic rollout: does the fitted policy brake when the sign gets close?"""
    episode = rollout(lambda obs: policy.mean_action(obs, features), initial_velocity, params, road, sim)
    brakes = any(t.action < 0 and t.obs.d_stop < near for t in episode.transitions)
    return ValidationReport(
        brakes_near_sign=brakes,
        terminal=episode.terminal,
        final_d_stop=episode.transitions[-1].next_obs.d_stop,
        actions=[t.action for t in episode.transitions],
    )


def write_demos_csv(demos: TrajectorySet, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for ep_id, ep in enumerate(demos.episodes):
            for k, t in enumerate(ep.transitions):
                writer.writerow(
                    [
                        ep_id,
                        k,
                        ep.label,
                        repr(t.position),
                        repr(t.obs.velocity),
                        repr(t.obs.d_stop),
                        repr(t.obs.speed_limit),
                        repr(t.obs.prev_action),
                        repr(t.action),
                        repr(t.realized_accel),
                        t.terminal.value,
                    ]
                )


def read_demos_csv(
    path: str | Path,
    params: VehicleParams = VehicleParams(),
    sim: SimConfig = SimConfig(),
    road: RoadConfig | None = None,
    seed: int | None = None,
) -> TrajectorySet:
    """Load a dataset written by :func:`write_demos_csv`.

    Successor observations come from the following row; the last transition of
    each episode is re-simulated, which is exact because the simulator is
    deterministic.
    """
    rows: dict[int, list[dict]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            rows.setdefault(int(row["episode_id"]), []).append(row)

    episodes = []
    for ep_id in sorted(rows):
        ep_rows = sorted(rows[ep_id], key=lambda r: int(r["step"]))
        parsed = [
            (
                float(r["position_m"]),
                Observation(
                    float(r["velocity_mps"]),
                    float(r["d_stop_m"]),
                    float(r["speed_limit_mps"]),
                    float(r["prev_action"]),
                ),
                float(r["action"]),
                float(r["realized_accel_mps2"]),
                Terminal(r["terminal"]),
            )
            for r in ep_rows
        ]
        transitions = []
        for k, (pos, obs, action, accel, terminal) in enumerate(parsed):
            if k + 1 < len(parsed):
                next_obs = parsed[k + 1][1]
            else:
                if road is None:
                    road = RoadConfig(length=pos + obs.d_stop, speed_limit=obs.speed_limit)
                state = SimState(pos, obs.velocity, 0.0, obs.prev_action, k)
                next_obs = observe(step(state, action, params, road, sim).next_state, road)
            transitions.append(Transition(pos, obs, action, next_obs, accel, terminal))
        episodes.append(Episode(transitions, ep_rows[0]["label"]))
    return TrajectorySet(episodes, seed)
