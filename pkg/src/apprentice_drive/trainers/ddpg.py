"""DDPG: deterministic actor, Q critic, target networks, and uniform experience replay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nets import Adam, Mlp, soft_update
from ..sim import Observation

OBS_DIM = 4


def normalize_obs(obs: Observation, length_scale: float) -> np.ndarray:
    return np.array([obs.velocity / obs.speed_limit, obs.d_stop / length_scale, obs.speed_limit / 20.0, obs.prev_action])


def build_actor(rng: np.random.Generator, hidden: int = 64) -> Mlp:
    return Mlp.build([OBS_DIM, hidden, hidden, 1], ["relu", "relu", "tanh"], rng, final_scale=0.1)


def build_critic(rng: np.random.Generator, hidden: int = 64) -> Mlp:
    return Mlp.build([OBS_DIM + 1, hidden, hidden, 1], ["relu", "relu", "linear"], rng)


@dataclass
class ActorPolicy:
    """Deterministic driving policy backed by an actor network."""

    actor: Mlp
    length_scale: float

    def mean_action(self, obs: Observation, features=None) -> float:
        return float(self.actor.forward(normalize_obs(obs, self.length_scale))[0])


@dataclass
class DdpgAgent:
    actor: Mlp
    critic: Mlp
    actor_target: Mlp
    critic_target: Mlp
    actor_opt: Adam
    critic_opt: Adam

    @classmethod
    def create(cls, rng: np.random.Generator, hidden: int = 64, lr_actor: float = 1e-3, lr_critic: float = 3e-4) -> DdpgAgent:
        actor = build_actor(rng, hidden)
        critic = build_critic(rng, hidden)
        return cls(
            actor,
            critic,
            actor.copy(),
            critic.copy(),
            Adam(actor.params(), lr_actor),
            Adam(critic.params(), lr_critic),
        )


def critic_targets(agent: DdpgAgent, reward, next_obs, done, gamma: float) -> np.ndarray:
    """Bellman targets from the target networks; terminal rows keep the reward only."""
    next_action = agent.actor_target.forward(next_obs)
    q_next = agent.critic_target.forward(np.hstack([next_obs, next_action]))[:, 0]
    return reward + gamma * (1.0 - done) * q_next


def critic_loss_and_grads(critic: Mlp, obs, action, y) -> tuple[float, list[np.ndarray]]:
    """Mean squared Bellman error and its parameter gradient."""
    q, cache = critic.forward_cached(np.hstack([obs, action[:, None]]))
    err = q[:, 0] - y
    n = len(y)
    grads, _ = critic.backward(cache, (2.0 / n) * err[:, None])
    return float(np.mean(err * err)), grads


def actor_grads(actor: Mlp, critic: Mlp, obs) -> list[np.ndarray]:
    """Gradient of ``-mean Q(s, mu(s))`` w.r.t. actor parameters (chained through dQ/da)."""
    mu, actor_cache = actor.forward_cached(obs)
    _, critic_cache = critic.forward_cached(np.hstack([obs, mu]))
    n = obs.shape[0]
    _, d_input = critic.backward(critic_cache, np.full((n, 1), -1.0 / n))
    grads, _ = actor.backward(actor_cache, d_input[:, -1:])
    return grads


def ddpg_update(agent: DdpgAgent, batch, gamma: float, tau: float) -> float:
    """One critic step, one actor step, then soft target updates.  Returns the critic loss.

    Raises ``FloatingPointError`` (parameters untouched) when the loss is not finite.
    """
    obs, action, reward, next_obs, done = batch
    y = critic_targets(agent, reward, next_obs, done, gamma)
    loss, grads = critic_loss_and_grads(agent.critic, obs, action, y)
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite critic loss")
    agent.critic_opt.step(agent.critic.params(), grads)
    agent.actor_opt.step(agent.actor.params(), actor_grads(agent.actor, agent.critic, obs))
    soft_update(agent.actor_target, agent.actor, tau)
    soft_update(agent.critic_target, agent.critic, tau)
    return loss
