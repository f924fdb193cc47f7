"""Quantile-regression heads for angle and magnitude, trained on the pinball loss.

A small fully connected ReLU network maps a feature vector to four bounded
outputs ``(q_lo_angle, q_hi_angle, q_lo_mag, q_hi_mag)``: angles through
``pi * tanh`` and magnitudes through ``sqrt(2) * sigmoid``. The lower heads
target the ``alpha/2`` quantile and the upper heads ``1 - alpha/2``.
Training is minibatch SGD with momentum and a cosine-annealed step size, in
float64, so a fixed seed reproduces the weights bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

N_OUTPUTS = 4
ANGLE_SCALE = math.pi
MAG_SCALE = math.sqrt(2.0)


def pinball_loss(y, y_hat, tau: float):
    """Quantile loss: ``tau * (y - y_hat)`` above, ``(1 - tau) * (y_hat - y)`` otherwise."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    diff = np.asarray(y, dtype=float) - np.asarray(y_hat, dtype=float)
    out = np.where(diff > 0, tau * diff, (tau - 1.0) * diff)
    return float(out) if np.ndim(out) == 0 else out


def pinball_gradient(y, y_hat, tau: float):
    """Subgradient of the pinball loss with respect to ``y_hat``.

    ``-tau`` when ``y > y_hat``, else ``1 - tau`` (including the kink).
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    diff = np.asarray(y, dtype=float) - np.asarray(y_hat, dtype=float)
    out = np.where(diff > 0, -tau, 1.0 - tau)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 1e-2
    batch_size: int = 64
    seed: int = 0
    hidden_sizes: tuple[int, ...] = (32, 32)
    momentum: float = 0.9
    schedule: str = "cosine"  # or "constant"

    def __post_init__(self):
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.schedule not in ("cosine", "constant"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden_sizes must be positive")


def quantile_levels(alpha: float) -> np.ndarray:
    return np.array([alpha / 2, 1 - alpha / 2, alpha / 2, 1 - alpha / 2])


@dataclass
class QuantileHeads:
    """Trained network. ``weights[i]`` has shape ``(fan_in, fan_out)``."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    alpha_trained: float
    config: TrainConfig = field(default_factory=TrainConfig)
    history: list[float] = field(default_factory=list, compare=False)

    @property
    def n_features(self) -> int:
        return self.weights[0].shape[0]

    def _check(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"expected features of dimension {self.n_features}, got shape {np.shape(features)}"
            )
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite values")
        return X

    def forward(self, features) -> np.ndarray:
        """Bounded raw outputs, shape ``(n, 4)``; quantiles may cross."""
        out, _ = _forward(self.weights, self.biases, self._check(features))
        return out

    def predict(self, features) -> np.ndarray:
        """Quantile estimates ``(n, 4)`` with crossed pairs swapped."""
        out = self.forward(features)
        for lo, hi in ((0, 1), (2, 3)):
            a, b = out[:, lo].copy(), out[:, hi].copy()
            out[:, lo] = np.minimum(a, b)
            out[:, hi] = np.maximum(a, b)
        return out

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["hidden_sizes"] = list(cfg["hidden_sizes"])
        return {
            "format": "polarcp.quantile_heads/1",
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "output_spec": {
                "order": ["q_lo_angle", "q_hi_angle", "q_lo_mag", "q_hi_mag"],
                "angle": {"activation": "tanh", "range": [-ANGLE_SCALE, ANGLE_SCALE]},
                "magnitude": {"activation": "sigmoid", "range": [0.0, MAG_SCALE]},
            },
            "alpha_trained": self.alpha_trained,
            "config": cfg,
            "seed": self.config.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "QuantileHeads":
        weights = [np.array(w, dtype=float) for w in doc["weights"]]
        biases = [np.array(b, dtype=float) for b in doc["biases"]]
        for i, w in enumerate(weights):
            if w.ndim != 2 or biases[i].shape != (w.shape[1],):
                raise ValueError(f"malformed layer {i} in heads document")
        if weights[-1].shape[1] != N_OUTPUTS:
            raise ValueError("heads document must have 4 outputs")
        return cls(weights, biases, float(doc["alpha_trained"]), TrainConfig(**doc["config"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "QuantileHeads":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _bound(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply output activations; also return d(out)/dz."""
    out = np.empty_like(z)
    dout = np.empty_like(z)
    t = np.tanh(z[:, :2])
    out[:, :2] = ANGLE_SCALE * t
    dout[:, :2] = ANGLE_SCALE * (1.0 - t * t)
    s = 0.5 * (1.0 + np.tanh(0.5 * z[:, 2:]))  # overflow-free logistic
    out[:, 2:] = MAG_SCALE * s
    dout[:, 2:] = MAG_SCALE * s * (1.0 - s)
    return out, dout


def _forward(weights, biases, X):
    acts = [X]
    h = X
    for w, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
        acts.append(h)
    z = h @ weights[-1] + biases[-1]
    out, dout = _bound(z)
    return out, (acts, dout)


def _targets(angle, magnitude) -> np.ndarray:
    a = np.asarray(angle, dtype=float)
    m = np.asarray(magnitude, dtype=float)
    return np.column_stack([a, a, m, m])


def network_loss(weights, biases, X, Y, taus) -> float:
    """Mean over samples of the summed pinball loss of the four outputs."""
    out, _ = _forward(weights, biases, X)
    diff = Y - out
    return float(np.mean(np.sum(np.where(diff > 0, taus * diff, (taus - 1.0) * diff), axis=1)))


def network_gradients(weights, biases, X, Y, taus):
    """Loss and its gradients with respect to every weight and bias."""
    out, (acts, dout) = _forward(weights, biases, X)
    diff = Y - out
    loss = float(np.mean(np.sum(np.where(diff > 0, taus * diff, (taus - 1.0) * diff), axis=1)))
    delta = np.where(diff > 0, -taus, 1.0 - taus) * dout / X.shape[0]
    gw = [None] * len(weights)
    gb = [None] * len(biases)
    for i in range(len(weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights[i].T) * (acts[i] > 0)
    return loss, gw, gb


def init_params(n_features: int, hidden_sizes, rng: np.random.Generator):
    sizes = [n_features, *hidden_sizes, N_OUTPUTS]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        r = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-r, r, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-r, r, size=fan_out))
    return weights, biases


def train(features, angle, magnitude, alpha: float, cfg: TrainConfig | None = None) -> QuantileHeads:
    """Fit heads for the ``alpha/2`` and ``1 - alpha/2`` quantiles.

    ``history[0]`` is the training loss at initialization and ``history[e]`` the
    loss after epoch ``e``.
    """
    cfg = cfg or TrainConfig()
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("features must be a non-empty 2-D array")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    Y = _targets(angle, magnitude)
    if Y.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} feature rows but {Y.shape[0]} targets")
    if not np.all(np.isfinite(Y)):
        raise ValueError("targets contain non-finite values")

    rng = np.random.default_rng(cfg.seed)
    weights, biases = init_params(X.shape[1], cfg.hidden_sizes, rng)
    taus = quantile_levels(alpha)
    vel_w = [np.zeros_like(w) for w in weights]
    vel_b = [np.zeros_like(b) for b in biases]
    history = [network_loss(weights, biases, X, Y, taus)]
    n = X.shape[0]
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate
        if cfg.schedule == "cosine":
            # anneal so the subgradient steps stop oscillating around the quantile
            lr *= 0.5 * (1.0 + math.cos(math.pi * epoch / cfg.epochs))
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, gw, gb = network_gradients(weights, biases, X[idx], Y[idx], taus)
            for i in range(len(weights)):
                vel_w[i] = cfg.momentum * vel_w[i] - lr * gw[i]
                vel_b[i] = cfg.momentum * vel_b[i] - lr * gb[i]
                weights[i] += vel_w[i]
                biases[i] += vel_b[i]
        history.append(network_loss(weights, biases, X, Y, taus))
    return QuantileHeads(weights, biases, alpha, cfg, history)


def predict_quantiles(heads: QuantileHeads, features) -> np.ndarray:
    """``(n, 4)`` array of ``(q_lo_angle, q_hi_angle, q_lo_mag, q_hi_mag)``."""
    return heads.predict(features)
