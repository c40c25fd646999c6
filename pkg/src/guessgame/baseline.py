"""Learned state-value baseline for variance reduction.

One hidden tanh layer mapping state features to a scalar expected return,
trained by SGD on squared error against the observed returns. Gradients are
closed form and finite-difference checked in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BaselineNet:
    w1: np.ndarray  # (H, F)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H,)
    b2: float

    @classmethod
    def init(cls, feature_dim: int, hidden: int, rng: np.random.Generator) -> "BaselineNet":
        return cls(
            w1=rng.normal(0.0, 1.0 / np.sqrt(feature_dim), size=(hidden, feature_dim)),
            b1=np.zeros(hidden),
            w2=rng.normal(0.0, 1.0 / np.sqrt(hidden), size=hidden),
            b2=0.0,
        )

    def copy(self) -> "BaselineNet":
        return BaselineNet(self.w1.copy(), self.b1.copy(), self.w2.copy(), float(self.b2))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2, [self.b2]])

    def set_flat(self, phi: np.ndarray) -> None:
        h, f = self.w1.shape
        self.w1[...] = phi[: h * f].reshape(h, f)
        self.b1[...] = phi[h * f : h * f + h]
        self.w2[...] = phi[h * f + h : h * f + 2 * h]
        self.b2 = float(phi[-1])

    def predict(self, feats: np.ndarray) -> np.ndarray:
        """Value for a (T, F) batch of feature rows (or a single row)."""
        single = feats.ndim == 1
        x = feats[None, :] if single else feats
        hidden = np.tanh(x @ self.w1.T + self.b1)
        v = hidden @ self.w2 + self.b2
        return float(v[0]) if single else v

    def loss_and_grads(self, feats: np.ndarray, targets: np.ndarray):
        """Mean squared error over steps and its gradient in the parameters."""
        hidden = np.tanh(feats @ self.w1.T + self.b1)  # (T, H)
        v = hidden @ self.w2 + self.b2
        err = v - targets
        loss = float(np.mean(err**2))
        dv = 2.0 * err / err.shape[0]
        dw2 = hidden.T @ dv
        db2 = float(dv.sum())
        dhidden = np.outer(dv, self.w2) * (1.0 - hidden**2)
        dw1 = dhidden.T @ feats
        db1 = dhidden.sum(axis=0)
        return loss, (dw1, db1, dw2, db2)

    def sgd_step(self, feats: np.ndarray, targets: np.ndarray, lr: float) -> float:
        """One SGD step on the MSE; returns the pre-step loss."""
        loss, (dw1, db1, dw2, db2) = self.loss_and_grads(feats, targets)
        self.w1 -= lr * dw1
        self.b1 -= lr * db1
        self.w2 -= lr * dw2
        self.b2 -= lr * db2
        return loss
