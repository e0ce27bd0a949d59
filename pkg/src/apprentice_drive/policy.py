"""Linear-Gaussian policy ``a ~ N(theta . phi(s), sigma^2)`` over the 9 policy features."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import FeatureConfig
from .features import N_POLICY_FEATURES, POLICY_FEATURES, policy_features
from .sim import Observation


@dataclass
class LinearGaussianPolicy:
    theta: np.ndarray
    sigma: float

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).copy()
        if self.theta.shape != (N_POLICY_FEATURES,):
            raise ValueError(f"theta must have shape ({N_POLICY_FEATURES},), got {self.theta.shape}")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta must be finite")
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")
        self.sigma = float(self.sigma)

    def mean(self, phi: np.ndarray) -> np.ndarray | float:
        return phi @ self.theta

    def mean_action(self, obs: Observation, cfg: FeatureConfig = FeatureConfig()) -> float:
        return float(policy_features(obs, cfg) @ self.theta)

    def score(self, phi: np.ndarray, action) -> np.ndarray:
        """Gradient of log N(a | theta . phi, sigma^2) w.r.t. theta; rows follow ``phi``."""
        if self.sigma <= 0:
            raise ValueError("score is undefined for a deterministic policy (sigma = 0)")
        residual = (np.asarray(action, dtype=float) - phi @ self.theta) / self.sigma**2
        return residual[..., None] * phi

    def to_dict(self) -> dict:
        return {
            "kind": "linear_gaussian",
            "features": list(POLICY_FEATURES),
            "theta": [float(x) for x in self.theta],
            "sigma": self.sigma,
        }

    @classmethod
    def from_dict(cls, data: dict) -> LinearGaussianPolicy:
        if data.get("kind") != "linear_gaussian":
            raise ValueError(f"not a linear-Gaussian policy record: kind={data.get('kind')!r}")
        if list(data.get("features", POLICY_FEATURES)) != list(POLICY_FEATURES):
            raise ValueError("policy feature set does not match this build")
        return cls(np.array(data["theta"], dtype=float), float(data["sigma"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> LinearGaussianPolicy:
        return cls.from_dict(json.loads(Path(path).read_text()))
