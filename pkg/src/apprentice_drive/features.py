"""Policy features for linear policies and the bounded reward features.

All functions accept scalars or equally shaped numpy arrays.  Reward features
lie in ``[-1, 0]``: zero on compliant states, saturating at ``-1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import FeatureConfig
from .sim import Observation

POLICY_FEATURES = (
    "bias",
    "speed_ratio",
    "over_limit",
    "under_limit",
    "proximity",
    "braking_demand",
    "proximity_x_speed",
    "crawl",
    "prev_action",
)
N_POLICY_FEATURES = len(POLICY_FEATURES)
REWARD_FEATURES = ("stop", "speed", "comfort")

SIMPLEX_TOL = 1e-9


def policy_feature_matrix(velocity, d_stop, speed_limit, prev_action, cfg: FeatureConfig = FeatureConfig()):
    """Stack the 9 policy features along the last axis."""
    v = np.asarray(velocity, dtype=float)
    d = np.asarray(d_stop, dtype=float)
    v_lim = np.asarray(speed_limit, dtype=float)
    prev = np.asarray(prev_action, dtype=float)
    v, d, v_lim, prev = np.broadcast_arrays(v, d, v_lim, prev)

    ratio = v / v_lim
    # past the sign the distance is clamped to 0, as in the stop reward feature
    proximity = np.exp(-np.maximum(d, 0.0) / cfg.proximity_scale)
    return np.stack(
        [
            np.ones_like(v),
            ratio,
            np.maximum(0.0, v - v_lim) / 10.0,
            np.maximum(0.0, v_lim - v) / v_lim,
            proximity,
            braking_demand(v, d, cfg),
            proximity * ratio,
            proximity * np.exp(-v / 2.0),
            prev,
        ],
        axis=-1,
    )


def policy_features(obs: Observation, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    return policy_feature_matrix(obs.velocity, obs.d_stop, obs.speed_limit, obs.prev_action, cfg)


def braking_demand(velocity, d_stop, cfg: FeatureConfig = FeatureConfig()):
    """Deceleration needed to stop at the sign, in units of the comfort limit (capped)."""
    v = np.asarray(velocity, dtype=float)
    demand = v * v / (2.0 * np.maximum(d_stop, cfg.distance_guard) * 0.5 * cfg.g)
    return np.clip(demand, 0.0, cfg.braking_demand_cap)


def reward_feature_stop(velocity, d_stop, cfg: FeatureConfig = FeatureConfig()):
    dv = np.asarray(velocity, dtype=float) - cfg.stop_mu_v
    dd = np.maximum(np.asarray(d_stop, dtype=float), 0.0) - cfg.stop_mu_d
    return np.exp(-(dv * dv + dd * dd) / (2.0 * cfg.stop_sigma**2)) - 1.0


def reward_feature_speed(velocity, speed_limit, cfg: FeatureConfig = FeatureConfig()):
    excess = np.minimum(0.0, np.asarray(speed_limit, dtype=float) - np.asarray(velocity, dtype=float))
    return np.maximum(excess / cfg.speed_scale, -1.0)


def reward_feature_comfort(accel, cfg: FeatureConfig = FeatureConfig()):
    half_g = 0.5 * cfg.g
    slack = np.minimum(0.0, half_g - np.abs(np.asarray(accel, dtype=float)))
    return np.maximum(slack / half_g, -1.0)


def reward_feature_matrix(velocity, d_stop, speed_limit, accel, cfg: FeatureConfig = FeatureConfig()):
    """Stack (stop, speed, comfort) along the last axis."""
    return np.stack(
        np.broadcast_arrays(
            reward_feature_stop(velocity, d_stop, cfg),
            reward_feature_speed(velocity, speed_limit, cfg),
            reward_feature_comfort(accel, cfg),
        ),
        axis=-1,
    )


def reward_features(obs: Observation, accel: float, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    return reward_feature_matrix(obs.velocity, obs.d_stop, obs.speed_limit, accel, cfg)


def check_simplex(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1 or not np.all(np.isfinite(omega)):
        raise ValueError(f"weights must be a finite vector, got {omega!r}")
    if np.any(omega < -SIMPLEX_TOL) or abs(omega.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"weights are not on the probability simplex: {omega.tolist()}")
    return omega


@dataclass(frozen=True)
class RewardWeights:
    omega: tuple[float, float, float]

    def __post_init__(self):
        check_simplex(self.omega)
        if len(self.omega) != len(REWARD_FEATURES):
            raise ValueError("need one weight per reward feature")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.omega, dtype=float)


PAPER_OMEGA = (0.5512, 0.1562, 0.2926)


def reward(obs: Observation, accel: float, weights, cfg: FeatureConfig = FeatureConfig()) -> float:
    """Linear reward ``omega . phi``; lies in ``[-1, 0]`` for simplex weights."""
    omega = weights.array if isinstance(weights, RewardWeights) else check_simplex(weights)
    return float(reward_features(obs, accel, cfg) @ omega)
