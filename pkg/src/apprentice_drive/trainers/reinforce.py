"""Batch REINFORCE on the linear-Gaussian policy."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..config import FeatureConfig, RoadConfig, SimConfig, VehicleParams
from ..features import policy_features
from ..nets import Adam
from ..policy import LinearGaussianPolicy
from ..sim import Terminal, observe, reset, step
from .common import RewardModel, compute_returns

log = logging.getLogger(__name__)


@dataclass
class EpisodeBatchItem:
    phi: np.ndarray
    actions: np.ndarray  # pre-clamp samples, the variable the policy density is over
    rewards: np.ndarray
    terminal: Terminal


@dataclass
class IterationStats:
    mean_return: float
    discounted_return: float
    grad_norm: float
    aborted: bool = False


def collect_episode(
    policy: LinearGaussianPolicy,
    reward_model: RewardModel,
    initial_velocity: float,
    rng: np.random.Generator,
    params: VehicleParams = VehicleParams(),
    road: RoadConfig = RoadConfig(),
    sim: SimConfig = SimConfig(),
    features: FeatureConfig = FeatureConfig(),
) -> EpisodeBatchItem:
    state = reset(road, initial_velocity)
    phis, actions, rewards = [], [], []
    while True:
        phi = policy_features(observe(state, road), features)
        action = float(phi @ policy.theta) + policy.sigma * float(rng.standard_normal())
        result = step(state, action, params, road, sim)
        state = result.next_state
        phis.append(phi)
        actions.append(action)
        rewards.append(reward_model(observe(state, road), state.accel, result.terminal))
        if result.terminal.done:
            return EpisodeBatchItem(np.array(phis), np.array(actions), np.array(rewards), result.terminal)


def batch_gradient(policy: LinearGaussianPolicy, batch: list[EpisodeBatchItem], gamma: float) -> np.ndarray:
    """Mean over episodes of ``sum_t score_t (G_t - b_t)``."""
    return policy_gradient(policy, batch, [compute_returns(ep.rewards, gamma) for ep in batch])


def policy_gradient(policy: LinearGaussianPolicy, batch: list[EpisodeBatchItem], returns: list[np.ndarray]) -> np.ndarray:
    """Score-function gradient from per-episode returns-to-go.

    The baseline ``b_t`` is the mean return-to-go at step ``t`` over the
    episodes of the batch still running at ``t``.
    """
    horizon = max(len(g) for g in returns)
    total = np.zeros(horizon)
    count = np.zeros(horizon)
    for g in returns:
        total[: len(g)] += g
        count[: len(g)] += 1
    baseline = total / np.maximum(count, 1)

    grad = np.zeros_like(policy.theta)
    for ep, g in zip(batch, returns):
        advantage = g - baseline[: len(g)]
        grad += policy.score(ep.phi, ep.actions).T @ advantage
    return grad / len(batch)


def reinforce_iteration(
    policy: LinearGaussianPolicy,
    optimizer: Adam,
    reward_model: RewardModel,
    initial_velocity: float,
    rngs: list[np.random.Generator],
    gamma: float,
    params: VehicleParams = VehicleParams(),
    road: RoadConfig = RoadConfig(),
    sim: SimConfig = SimConfig(),
    features: FeatureConfig = FeatureConfig(),
) -> tuple[LinearGaussianPolicy, IterationStats]:
    """Collect one episode per generator in ``rngs`` and take one ascent step on theta."""
    if not policy.sigma > 0:
        raise ValueError("REINFORCE needs a stochastic policy (sigma > 0)")
    batch = [collect_episode(policy, reward_model, initial_velocity, rng, params, road, sim, features) for rng in rngs]
    grad = batch_gradient(policy, batch, gamma)
    mean_return = float(np.mean([ep.rewards.sum() for ep in batch]))
    discounted = float(np.mean([compute_returns(ep.rewards, gamma)[0] for ep in batch]))
    norm = float(np.linalg.norm(grad))
    if not np.isfinite(norm):
        log.warning("non-finite policy gradient; keeping previous parameters")
        return policy, IterationStats(mean_return, discounted, norm, aborted=True)
    theta = policy.theta.copy()
    optimizer.step([theta], [-grad])
    return LinearGaussianPolicy(theta, policy.sigma), IterationStats(mean_return, discounted, norm)
