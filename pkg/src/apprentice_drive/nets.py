"""Small dense networks with hand-written backpropagation, Adam, and soft target updates.

Weights are stored as ``(fan_in, fan_out)`` matrices so a batch of row
vectors maps through ``x @ W + b``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("linear", "relu", "tanh")


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(z: np.ndarray, out: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(float)
    if kind == "tanh":
        return 1.0 - out * out
    return np.ones_like(z)


@dataclass
class Layer:
    W: np.ndarray
    b: np.ndarray
    activation: str = "linear"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[1],):
            raise ValueError(f"bias shape {self.b.shape} does not match weights {self.W.shape}")


@dataclass
class Mlp:
    layers: list[Layer] = field(default_factory=list)

    @classmethod
    def build(
        cls,
        sizes: list[int],
        activations: list[str],
        rng: np.random.Generator,
        final_scale: float = 1.0,
    ) -> Mlp:
        """Fan-in uniform init ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``; last layer scaled."""
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        layers = []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = 1.0 / math.sqrt(n_in)
            W = rng.uniform(-bound, bound, size=(n_in, n_out))
            b = rng.uniform(-bound, bound, size=n_out)
            if i == len(sizes) - 2:
                W *= final_scale
                b *= final_scale
            layers.append(Layer(W, b, activations[i]))
        return cls(layers)

    @property
    def sizes(self) -> list[int]:
        return [self.layers[0].W.shape[0]] + [layer.W.shape[1] for layer in self.layers]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend((layer.W, layer.b))
        return out

    def copy(self) -> Mlp:
        return Mlp([Layer(layer.W.copy(), layer.b.copy(), layer.activation) for layer in self.layers])

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.sizes[0]:
            raise ValueError(f"input width {x.shape[-1]} does not match layer spec {self.sizes[0]}")
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = self._check_input(x)
        for layer in self.layers:
            h = _activate(h @ layer.W + layer.b, layer.activation)
        return h

    __call__ = forward

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        h = self._check_input(x)
        cache = []
        for layer in self.layers:
            z = h @ layer.W + layer.b
            out = _activate(z, layer.activation)
            cache.append((h, z, out))
            h = out
        return h, cache

    def backward(self, cache: list, upstream: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of ``sum(upstream * output)`` w.r.t. parameters and input."""
        delta = np.asarray(upstream, dtype=float)
        if delta.shape != cache[-1][2].shape:
            raise ValueError(f"upstream shape {delta.shape} does not match output {cache[-1][2].shape}")
        grads: list[np.ndarray] = []
        for layer, (h, z, out) in zip(reversed(self.layers), reversed(cache)):
            dz = delta * _activation_grad(z, out, layer.activation)
            if dz.ndim == 1:
                dW, db = np.outer(h, dz), dz
            else:
                dW, db = h.T @ dz, dz.sum(axis=0)
            grads[:0] = [dW, db]
            delta = dz @ layer.W.T
        return grads, delta

    def gradient(self, x: np.ndarray, upstream: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        _, cache = self.forward_cached(x)
        return self.backward(cache, upstream)

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "layers": [
                {
                    "activation": layer.activation,
                    "fan_in": layer.W.shape[0],
                    "fan_out": layer.W.shape[1],
                    "weights": layer.W.tolist(),
                    "bias": layer.b.tolist(),
                }
                for layer in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Mlp:
        layers = []
        for rec in data["layers"]:
            W = np.array(rec["weights"], dtype=float).reshape(rec["fan_in"], rec["fan_out"])
            layers.append(Layer(W, np.array(rec["bias"], dtype=float), rec["activation"]))
        net = cls(layers)
        if net.sizes != list(data["sizes"]):
            raise ValueError("layer shapes do not chain")
        return net


def mlp_forward(params: Mlp, x: np.ndarray) -> np.ndarray:
    return params.forward(x)


def mlp_gradient(params: Mlp, x: np.ndarray, upstream: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    return params.gradient(x, upstream)


class Adam:
    """Bias-corrected adaptive-moment optimizer; ``step`` updates arrays in place."""

    def __init__(self, params: list[np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        if not lr > 0:
            raise ValueError("learning rate must be > 0")
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """Descend along ``grads``."""
        if len(grads) != len(self.m) or any(g.shape != m.shape for g, m in zip(grads, self.m)):
            raise ValueError("gradient shapes do not match optimizer state")
        if not all(np.all(np.isfinite(g)) for g in grads):
            raise FloatingPointError("non-finite gradient")
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def soft_update(target: Mlp, source: Mlp, tau: float) -> Mlp:
    """In place ``target <- (1 - tau) target + tau source``; returns ``target``."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if target.sizes != source.sizes:
        raise ValueError(f"shape mismatch: {target.sizes} vs {source.sizes}")
    for t, s in zip(target.params(), source.params()):
        t *= 1.0 - tau
        t += tau * s
    return target


def policy_act(policy, inputs: np.ndarray, noise_std: float = 0.0, rng: np.random.Generator | None = None) -> float:
    """Mean action plus optional Gaussian noise; clamping happens in the simulator.

    ``policy`` is either a linear-Gaussian policy (``inputs`` are its features)
    or an actor network (``inputs`` is the normalized observation).
    """
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    if isinstance(policy, Mlp):
        mean = float(policy.forward(inputs)[0])
    else:
        mean = float(np.asarray(inputs) @ policy.theta)
    if noise_std == 0.0:
        return mean
    if rng is None:
        raise ValueError("a random generator is required when noise_std > 0")
    return mean + noise_std * float(rng.standard_normal())


def save_checkpoint(path: str | Path, nets: dict[str, Mlp], meta: dict | None = None) -> None:
    """JSON checkpoint: ``{"meta": {...}, "networks": {name: {"sizes", "layers": [...]}}}``.

    Each layer record holds ``activation``, ``fan_in``, ``fan_out``, row-major
    ``weights`` (``fan_in`` rows) and ``bias``; floats keep full precision.
    """
    record = {"meta": meta or {}, "networks": {name: net.to_dict() for name, net in nets.items()}}
    Path(path).write_text(json.dumps(record) + "\n")


def load_checkpoint(path: str | Path) -> tuple[dict[str, Mlp], dict]:
    data = json.loads(Path(path).read_text())
    return {name: Mlp.from_dict(rec) for name, rec in data["networks"].items()}, data.get("meta", {})
