"""Gradient inverse RL: recover simplex reward weights from expert demonstrations.

For a reward linear in its features the expert objective gradient is
``G @ omega`` where column ``q`` of ``G`` is the policy gradient of the
expected discounted sum of feature ``q``.  The recovered weights minimize
``||G omega||^2`` over the probability simplex.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .config import FeatureConfig
from .demos import TrajectorySet
from .errors import AmbiguousSolutionError
from .features import check_simplex
from .policy import LinearGaussianPolicy

log = logging.getLogger(__name__)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{w : w >= 0, sum(w) = 1}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def gpomdp_gradients(
    episodes: Iterable[tuple[np.ndarray, np.ndarray, np.ndarray]],
    policy: LinearGaussianPolicy,
    gamma: float,
) -> np.ndarray:
    """Per-episode GPOMDP estimates, shape ``(n_episodes, n_params, n_reward_features)``.

    Each episode is ``(phi, actions, psi)`` where ``psi[t]`` holds the reward
    features of the state reached by action ``t``.
    """
    if not policy.sigma > 0:
        raise ValueError("GPOMDP needs a stochastic policy (sigma > 0)")
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    out = []
    for phi, actions, psi in episodes:
        cum_score = np.cumsum(policy.score(phi, actions), axis=0)
        discount = gamma ** np.arange(len(actions))
        out.append(cum_score.T @ (discount[:, None] * psi))
    if not out:
        raise ValueError("no episodes")
    return np.stack(out)


def estimate_feature_gradients(
    demos: TrajectorySet,
    policy: LinearGaussianPolicy,
    gamma: float = 0.995,
    features: FeatureConfig = FeatureConfig(),
) -> np.ndarray:
    if not demos.episodes:
        raise ValueError("empty demonstration set")
    per_episode = gpomdp_gradients((ep.arrays(features) for ep in demos.episodes), policy, gamma)
    return per_episode.mean(axis=0)


@dataclass
class GirlSolution:
    omega: np.ndarray
    objective: float
    iterations: int

    def vertex_objectives(self, G: np.ndarray) -> np.ndarray:
        return np.sum(G * G, axis=0)

    def certificate(self, G: np.ndarray) -> np.ndarray:
        """Directional derivatives of ``||G w||^2`` from ``omega`` toward each vertex."""
        grad = 2.0 * G.T @ (G @ self.omega)
        return grad - grad @ self.omega


def solve_simplex_min_norm(G: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000) -> GirlSolution:
    """Minimize ``||G w||^2`` over the simplex by projected gradient descent."""
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[1] < 1:
        raise ValueError(f"G must be a 2-d matrix with at least one column, got shape {G.shape}")
    if not np.all(np.isfinite(G)):
        raise ValueError("G must be finite")
    if not np.any(G):
        raise AmbiguousSolutionError("all-zero gradient matrix: every simplex point is optimal")
    q = G.shape[1]
    if q == 1:
        omega = np.ones(1)
        return GirlSolution(omega, float(np.sum(G * G)), 0)

    A = G.T @ G
    # fixed step 1/L with L = 2 lambda_max; normalizing keeps iterates scale invariant
    A = A / np.linalg.eigvalsh(A)[-1]
    omega = np.full(q, 1.0 / q)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        nxt = project_simplex(omega - A @ omega)
        moved = np.max(np.abs(nxt - omega))
        omega = nxt
        if moved < tol:
            break
    omega = _polish(G, omega)
    residual = G @ omega
    return GirlSolution(omega, float(residual @ residual), iterations)


def _face_minimizer(G: np.ndarray, support: tuple[int, ...]) -> np.ndarray | None:
    """Minimizer of ``||G w||^2`` subject to ``sum(w) = 1`` with ``w`` zero off ``support``.

    Solves the KKT system (one refinement pass); returns ``None`` when the
    result leaves the simplex.
    """
    idx = list(support)
    out = np.zeros(G.shape[1])
    norm = np.linalg.norm(G[:, idx])
    if norm == 0:
        out[idx] = 1.0 / len(idx)  # every point of an all-zero face is optimal
        return out
    Gs = G[:, idx] / norm
    k = len(idx)
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = 2.0 * Gs.T @ Gs
    K[:k, k] = K[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    correction, *_ = np.linalg.lstsq(K, rhs - K @ sol, rcond=None)
    x = (sol + correction)[:k]
    if not np.all(np.isfinite(x)) or np.any(x < -1e-12):
        return None
    x = np.maximum(x, 0.0)
    if x.sum() <= 0:
        return None
    out[idx] = x / x.sum()
    return out


def _polish(G: np.ndarray, omega: np.ndarray, max_support: int = 8) -> np.ndarray:
    """Replace the PGD iterate by the exact minimizer of the face it converged to.

    PGD's stopping rule leaves a KKT residual proportional to the scale of
    ``G`` and can stop a hair away from a lower-dimensional face.  Every face
    spanned by the iterate's support is solved exactly and the feasible point
    (the iterate included) that best satisfies the optimality conditions is kept.
    Objective values cannot make that choice: they are flat at the optimum.
    """
    support = tuple(np.flatnonzero(omega > 0))
    if len(support) <= max_support:
        faces = [c for r in range(1, len(support) + 1) for c in itertools.combinations(support, r)]
    else:
        faces = [support]
    Gn = G / np.linalg.norm(G)

    def kkt_margin(w: np.ndarray) -> float:
        # most negative directional derivative toward a vertex; 0 at the optimum
        grad = Gn.T @ (Gn @ w)
        return float(np.min(grad - grad @ w))

    best, best_margin = omega, kkt_margin(omega)
    for face in faces:
        candidate = _face_minimizer(G, face)
        if candidate is None:
            continue
        margin = kkt_margin(candidate)
        if margin > best_margin:
            best, best_margin = candidate, margin
    return best


def recover_reward(
    demos: TrajectorySet,
    policy: LinearGaussianPolicy,
    gamma: float = 0.995,
    features: FeatureConfig = FeatureConfig(),
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> tuple[GirlSolution, np.ndarray]:
    G = estimate_feature_gradients(demos, policy, gamma, features)
    solution = solve_simplex_min_norm(G, tol, max_iter)
    log.info("gradient matrix:\n%s", G)
    log.info("omega=%s objective=%.6g iterations=%d", solution.omega, solution.objective, solution.iterations)
    return solution, G


def write_girl_result(path: str | Path, solution: GirlSolution, G: np.ndarray) -> None:
    record = {
        "omega": [float(x) for x in solution.omega],
        "objective": solution.objective,
        "iterations": solution.iterations,
        "gradient_matrix": [[float(x) for x in row] for row in G],
    }
    Path(path).write_text(json.dumps(record, indent=2) + "\n")


def read_omega(path: str | Path) -> np.ndarray:
    return check_simplex(json.loads(Path(path).read_text())["omega"])
