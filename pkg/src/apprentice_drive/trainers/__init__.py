"""REINFORCE and DDPG training loops."""

from .common import (
    LearningCurve,
    NoiseSchedule,
    ReplayBuffer,
    RewardModel,
    compute_returns,
    noise_step,
    replay_push,
    replay_sample,
)
from .ddpg import ActorPolicy, DdpgAgent, ddpg_update
from .reinforce import reinforce_iteration
from .run import TrainResult, load_policy, train

__all__ = [
    "ActorPolicy",
    "DdpgAgent",
    "LearningCurve",
    "NoiseSchedule",
    "ReplayBuffer",
    "RewardModel",
    "TrainResult",
    "compute_returns",
    "ddpg_update",
    "load_policy",
    "noise_step",
    "reinforce_iteration",
    "replay_push",
    "replay_sample",
    "train",
]
