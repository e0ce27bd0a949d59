"""Pieces shared by the REINFORCE and DDPG trainers."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..config import FeatureConfig
from ..features import check_simplex, reward_feature_matrix
from ..sim import Observation, Terminal


def compute_returns(rewards, gamma: float) -> np.ndarray:
    """Discounted returns ``G_t = r_{t+1} + gamma G_{t+1}`` with zero value after the end."""
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    rewards = np.asarray(rewards, dtype=float)
    out = np.empty_like(rewards)
    running = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        running = rewards[t] + gamma * running
        out[t] = running
    return out


class RewardModel:
    """Recovered linear reward, evaluated on the state an action leads to.

    With ``absorbing_tail`` the reward of a terminal transition also carries
    the discounted value of the absorbing state the episode ends in: a stopped
    car keeps collecting the reward of its resting state, a car past the sign
    collects the reward floor ``-1`` forever.  Without it, ending the episode
    would stop the penalty stream and stopping anywhere or running the sign
    would beat a proper stop.
    """

    def __init__(self, omega, features: FeatureConfig = FeatureConfig(), gamma: float = 0.99, absorbing_tail: bool = True):
        self.omega = check_simplex(omega)
        self.features = features
        self.gamma = gamma
        self.absorbing_tail = absorbing_tail

    def instant(self, next_obs: Observation, accel: float) -> float:
        psi = reward_feature_matrix(next_obs.velocity, next_obs.d_stop, next_obs.speed_limit, accel, self.features)
        return float(psi @ self.omega)

    def tail(self, next_obs: Observation, terminal: Terminal) -> float:
        if not self.absorbing_tail:
            return 0.0
        horizon = self.gamma / (1.0 - self.gamma)
        if terminal is Terminal.STOPPED:
            return horizon * self.instant(next_obs, 0.0)
        if terminal is Terminal.CROSSED_SIGN:
            return -horizon
        return 0.0

    def __call__(self, next_obs: Observation, accel: float, terminal: Terminal) -> float:
        return self.instant(next_obs, accel) + self.tail(next_obs, terminal)


@dataclass
class NoiseSchedule:
    """Exploration scale: held for ``memory_size`` action steps, then decays geometrically.

    The scale is kept in closed form, ``initial * decay**k`` after ``k`` decay
    steps, so long schedules do not accumulate rounding error.
    """

    initial: float = 3.0
    decay: float = 0.999
    memory_size: int = 10_000
    counter: int = 1
    decay_steps: int = 0

    @property
    def variance(self) -> float:
        return self.initial * self.decay**self.decay_steps

    def step(self) -> NoiseSchedule:
        self.counter += 1
        if self.counter > self.memory_size:
            self.decay_steps += 1
        return self


def noise_step(schedule: NoiseSchedule) -> NoiseSchedule:
    return schedule.step()


class ReplayBuffer:
    """Ring buffer of ``(obs, action, reward, next_obs, done)`` rows."""

    def __init__(self, capacity: int, obs_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.action = np.zeros(capacity)
        self.reward = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.cursor = 0
        self.size = 0

    @property
    def filled(self) -> bool:
        return self.size == self.capacity

    def __len__(self) -> int:
        return self.size

    def push(self, obs, action: float, reward: float, next_obs, done: bool) -> None:
        i = self.cursor
        self.obs[i] = obs
        self.action[i] = action
        self.reward[i] = reward
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n > self.size:
            raise ValueError(f"cannot sample {n} transitions from a buffer holding {self.size}")
        return rng.integers(0, self.size, size=n)

    def sample(self, n: int, rng: np.random.Generator):
        idx = self.sample_indices(n, rng)
        return self.obs[idx], self.action[idx], self.reward[idx], self.next_obs[idx], self.done[idx]


def replay_push(buffer: ReplayBuffer, *transition) -> ReplayBuffer:
    buffer.push(*transition)
    return buffer


def replay_sample(buffer: ReplayBuffer, n: int, rng: np.random.Generator):
    return buffer.sample(n, rng)


CURVE_COLUMNS = (
    "iteration",
    "episodes_seen",
    "mean_return",
    "discounted_return",
    "grad_norm_or_critic_loss",
    "noise_variance",
)


@dataclass
class LearningCurve:
    rows: list[tuple] = field(default_factory=list)

    def append(self, iteration, episodes_seen, mean_return, discounted_return, signal, noise_variance) -> None:
        if self.rows and iteration <= self.rows[-1][0]:
            raise ValueError("iteration index must increase")
        self.rows.append(
            (int(iteration), int(episodes_seen), float(mean_return), float(discounted_return), float(signal), float(noise_variance))
        )

    def column(self, name: str) -> np.ndarray:
        return np.array([row[CURVE_COLUMNS.index(name)] for row in self.rows])

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CURVE_COLUMNS)
            for row in self.rows:
                writer.writerow([row[0], row[1], *(repr(x) for x in row[2:])])

    @classmethod
    def read_csv(cls, path: str | Path) -> LearningCurve:
        curve = cls()
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                curve.append(*(float(rec[c]) if i > 1 else int(rec[c]) for i, c in enumerate(CURVE_COLUMNS)))
        return curve
