"""Training driver: runs either algorithm and persists curves, checkpoints and the final policy."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..config import RunConfig
from ..nets import Adam, load_checkpoint, save_checkpoint
from ..policy import LinearGaussianPolicy
from ..sim import Terminal, clamp_action, observe, reset, step
from .common import LearningCurve, NoiseSchedule, ReplayBuffer, RewardModel
from .ddpg import OBS_DIM, ActorPolicy, DdpgAgent, ddpg_update, normalize_obs
from .reinforce import reinforce_iteration

log = logging.getLogger(__name__)

FINAL_POLICY = "final.json"


@dataclass
class TrainResult:
    curve: LearningCurve
    policy: object
    final_path: Path | None = None


def _checkpoint_dir(run_dir: Path | None) -> Path | None:
    if run_dir is None:
        return None
    path = Path(run_dir) / "checkpoints"
    path.mkdir(parents=True, exist_ok=True)
    return path


def save_linear_checkpoint(path: Path, policy: LinearGaussianPolicy, meta: dict | None = None) -> None:
    record = {"meta": {"kind": "linear_gaussian", **(meta or {})}, "policy": policy.to_dict()}
    path.write_text(json.dumps(record) + "\n")


def load_policy(path: str | Path):
    """Load a final policy (linear-Gaussian or DDPG actor) from a checkpoint file."""
    data = json.loads(Path(path).read_text())
    if "policy" in data:
        return LinearGaussianPolicy.from_dict(data["policy"])
    if data.get("kind") == "linear_gaussian":
        return LinearGaussianPolicy.from_dict(data)
    nets, meta = load_checkpoint(path)
    if "actor" not in nets:
        raise ValueError(f"{path}: no actor network in checkpoint")
    if nets["actor"].sizes[0] != OBS_DIM or nets["actor"].sizes[-1] != 1:
        raise ValueError(f"{path}: actor maps {nets['actor'].sizes[0]} inputs, this build observes {OBS_DIM}")
    return ActorPolicy(nets["actor"], float(meta["length_scale"]))


def train_reinforce(
    config: RunConfig,
    omega,
    expert: LinearGaussianPolicy,
    seed: int = 0,
    run_dir: Path | None = None,
) -> TrainResult:
    tc = config.train
    gamma = tc.reinforce_gamma
    reward_model = RewardModel(omega, config.features, gamma, tc.absorbing_tail)
    policy = LinearGaussianPolicy(expert.theta, expert.sigma)
    optimizer = Adam([policy.theta], tc.lr_actor)
    curve = LearningCurve()
    ckpt_dir = _checkpoint_dir(run_dir)
    streams = np.random.SeedSequence(seed).spawn(tc.iterations)
    for it in range(tc.iterations):
        rngs = [np.random.default_rng(s) for s in streams[it].spawn(tc.batch_trajectories)]
        policy, stats = reinforce_iteration(
            policy,
            optimizer,
            reward_model,
            tc.initial_velocity,
            rngs,
            gamma,
            config.vehicle,
            config.road,
            config.sim,
            config.features,
        )
        curve.append(it + 1, (it + 1) * tc.batch_trajectories, stats.mean_return, stats.discounted_return, stats.grad_norm, policy.sigma)
        log.info("reinforce it=%d return=%.4f |g|=%.4g", it + 1, stats.mean_return, stats.grad_norm)
        if ckpt_dir is not None and (it + 1) % tc.checkpoint_every == 0:
            save_linear_checkpoint(ckpt_dir / f"iter_{it + 1:04d}.json", policy, {"iteration": it + 1})
    final_path = None
    if ckpt_dir is not None:
        final_path = ckpt_dir / FINAL_POLICY
        save_linear_checkpoint(final_path, policy, {"iteration": tc.iterations})
    return TrainResult(curve, policy, final_path)


def train_ddpg(config: RunConfig, omega, seed: int = 0, run_dir: Path | None = None) -> TrainResult:
    tc = config.train
    gamma = tc.ddpg_gamma
    road, params, sim = config.road, config.vehicle, config.sim
    reward_model = RewardModel(omega, config.features, gamma, tc.absorbing_tail)
    init_ss, noise_ss, sample_ss = np.random.SeedSequence(seed).spawn(3)
    agent = DdpgAgent.create(np.random.default_rng(init_ss), tc.hidden, tc.lr_actor, tc.lr_critic)
    noise_rng = np.random.default_rng(noise_ss)
    sample_rng = np.random.default_rng(sample_ss)
    schedule = NoiseSchedule(tc.noise_variance, tc.noise_decay, tc.memory_size)
    buffer = ReplayBuffer(tc.memory_size, OBS_DIM)
    length_scale = road.length
    curve = LearningCurve()
    ckpt_dir = _checkpoint_dir(run_dir)
    meta = {"kind": "ddpg", "length_scale": length_scale}
    started = time.perf_counter()

    for episode in range(tc.episodes):
        state = reset(road, tc.initial_velocity)
        x = normalize_obs(observe(state, road), length_scale)
        rewards, losses = [], []
        while True:
            mean = float(agent.actor.forward(x)[0])
            action = mean + schedule.variance * float(noise_rng.standard_normal())
            schedule.step()
            result = step(state, action, params, road, sim)
            state = result.next_state
            next_obs = observe(state, road)
            x_next = normalize_obs(next_obs, length_scale)
            r = reward_model(next_obs, state.accel, result.terminal)
            done = result.terminal in (Terminal.STOPPED, Terminal.CROSSED_SIGN)
            buffer.push(x, clamp_action(action), r, x_next, done)
            rewards.append(r)
            if buffer.filled:
                try:
                    losses.append(ddpg_update(agent, buffer.sample(tc.minibatch, sample_rng), gamma, tc.tau))
                except FloatingPointError:
                    log.warning("episode %d: aborted a minibatch with non-finite values", episode + 1)
            x = x_next
            if result.terminal.done:
                break
        rewards = np.array(rewards)
        discounted = float(np.sum(rewards * gamma ** np.arange(len(rewards))))
        loss = float(np.mean(losses)) if losses else float("nan")
        curve.append(episode + 1, episode + 1, rewards.sum(), discounted, loss, schedule.variance)
        log.info(
            "ddpg ep=%d steps=%d end=%s return=%.3f loss=%.4g var=%.4g d_stop=%.2f (%.0fs)",
            episode + 1,
            len(rewards),
            result.terminal.value,
            rewards.sum(),
            loss,
            schedule.variance,
            next_obs.d_stop,
            time.perf_counter() - started,
        )
        if ckpt_dir is not None and (episode + 1) % tc.checkpoint_every == 0:
            save_checkpoint(
                ckpt_dir / f"episode_{episode + 1:04d}.json",
                {"actor": agent.actor, "critic": agent.critic},
                {**meta, "episode": episode + 1},
            )
    policy = ActorPolicy(agent.actor, length_scale)
    final_path = None
    if ckpt_dir is not None:
        final_path = ckpt_dir / FINAL_POLICY
        save_checkpoint(
            final_path,
            {"actor": agent.actor, "critic": agent.critic, "actor_target": agent.actor_target, "critic_target": agent.critic_target},
            {**meta, "episode": tc.episodes},
        )
    return TrainResult(curve, policy, final_path)


def train(config: RunConfig, omega, run_dir: str | Path | None = None, seed: int = 0, expert: LinearGaussianPolicy | None = None) -> TrainResult:
    """Run the configured algorithm; with ``run_dir`` also persist its artifacts."""
    run_dir = Path(run_dir) if run_dir is not None else None
    if config.train.algo == "reinforce":
        if expert is None:
            raise ValueError("REINFORCE starts from the fitted expert policy; none was given")
        result = train_reinforce(config, omega, expert, seed, run_dir)
    else:
        result = train_ddpg(config, omega, seed, run_dir)
    if run_dir is not None:
        result.curve.write_csv(run_dir / "learning_curve.csv")
    return result
