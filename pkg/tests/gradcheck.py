"""Central finite-difference gradient checks shared by the unit and acceptance suites."""

import numpy as np

from apprentice_drive.nets import Layer, Mlp
from apprentice_drive.trainers.ddpg import OBS_DIM, actor_grads, build_actor, build_critic, critic_loss_and_grads

H = 1e-5


def fd_grads(f, params: list[np.ndarray], h: float = H) -> list[np.ndarray]:
    out = []
    for p in params:
        g = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + h
            up = f()
            p[i] = old - h
            down = f()
            p[i] = old
            g[i] = (up - down) / (2 * h)
        out.append(g)
    return out


def rel_error(analytic: list[np.ndarray], numeric: list[np.ndarray]) -> float:
    a = np.concatenate([x.ravel() for x in analytic])
    n = np.concatenate([x.ravel() for x in numeric])
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n), 1e-12))


def layer_case(rng: np.random.Generator, activation: str) -> float:
    n_in, n_out, batch = rng.integers(1, 7), rng.integers(1, 7), rng.integers(1, 5)
    net = Mlp([Layer(rng.normal(size=(n_in, n_out)), rng.normal(size=n_out), activation)])
    x = rng.normal(size=(batch, n_in))
    up = rng.normal(size=(batch, n_out))
    grads, dx = net.gradient(x, up)
    numeric = fd_grads(lambda: float(np.sum(up * net.forward(x))), net.params())
    numeric_x = fd_grads(lambda: float(np.sum(up * net.forward(x))), [x])
    return max(rel_error(grads, numeric), rel_error([dx], numeric_x))


def mlp_case(rng: np.random.Generator) -> float:
    depth = rng.integers(1, 4)
    sizes = [int(s) for s in rng.integers(1, 9, size=depth + 1)]
    acts = [str(a) for a in rng.choice(["linear", "relu", "tanh"], size=depth)]
    net = Mlp.build(sizes, acts, rng)
    for p in net.params():
        p += 0.1 * rng.normal(size=p.shape)  # nonzero biases
    x = rng.normal(size=(3, sizes[0]))
    up = rng.normal(size=(3, sizes[-1]))
    grads, dx = net.gradient(x, up)
    numeric = fd_grads(lambda: float(np.sum(up * net.forward(x))), net.params())
    numeric_x = fd_grads(lambda: float(np.sum(up * net.forward(x))), [x])
    return max(rel_error(grads, numeric), rel_error([dx], numeric_x))


def critic_loss_case(rng: np.random.Generator, hidden: int = 8) -> float:
    critic = build_critic(rng, hidden)
    n = int(rng.integers(1, 9))
    obs, action, y = rng.normal(size=(n, OBS_DIM)), rng.uniform(-1, 1, n), rng.normal(size=n)
    _, grads = critic_loss_and_grads(critic, obs, action, y)
    numeric = fd_grads(lambda: critic_loss_and_grads(critic, obs, action, y)[0], critic.params())
    return rel_error(grads, numeric)


def actor_case(rng: np.random.Generator, hidden: int = 8) -> float:
    actor = build_actor(rng, hidden)
    for p in actor.params():
        p += 0.3 * rng.normal(size=p.shape)
    critic = build_critic(rng, hidden)
    obs = rng.normal(size=(int(rng.integers(1, 9)), OBS_DIM))

    def objective():
        mu = actor.forward(obs)
        return -float(np.mean(critic.forward(np.hstack([obs, mu]))))

    return rel_error(actor_grads(actor, critic, obs), fd_grads(objective, actor.params()))


def all_cases(seed: int = 0, per_kind: int = 20) -> list[tuple[str, float]]:
    rng = np.random.default_rng(seed)
    out = []
    for act in ("linear", "relu", "tanh"):
        out += [(f"layer-{act}", layer_case(rng, act)) for _ in range(per_kind)]
    out += [("mlp", mlp_case(rng)) for _ in range(per_kind)]
    out += [("critic-loss", critic_loss_case(rng)) for _ in range(per_kind)]
    out += [("actor", actor_case(rng)) for _ in range(per_kind)]
    return out
