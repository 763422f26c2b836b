"""Least-squares linear regression fit by SGD under an L1 penalty."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class LinearModel:
    coef: np.ndarray
    intercept: float


@njit(cache=True)
def _sgd_l1(X, y, lr, l1, iterations, seed, w):
    np.random.seed(seed)
    n, p = X.shape
    b = 0.0
    shrink = lr * l1
    for it in range(iterations):
        order = np.random.permutation(n)
        for t in range(n):
            r = order[t]
            pred = b
            for j in range(p):
                pred += w[j] * X[r, j]
            err = pred - y[r]
            b -= lr * err
            for j in range(p):
                v = w[j] - lr * err * X[r, j]
                # truncated-gradient soft threshold
                if v > shrink:
                    w[j] = v - shrink
                elif v < -shrink:
                    w[j] = v + shrink
                else:
                    w[j] = 0.0
            if not np.isfinite(b):
                return it, b
    return -1, b


def sgd_fit(X, y, lr: float = 0.001, l1: float = 0.001, iterations: int = 15, seed: int = 0) -> LinearModel:
    """Per-sample squared-error gradient steps with soft L1 shrinkage on the coefficients."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("SGD fit needs at least one row")
    w = np.zeros(X.shape[1])
    status, b = _sgd_l1(X, y, float(lr), float(l1), int(iterations), int(seed), w)
    if status >= 0 or not np.all(np.isfinite(w)):
        raise FloatingPointError(f"SGD diverged in iteration {max(status, 0)}; lower the learning rate")
    return LinearModel(w, float(b))


def linear_predict(model: LinearModel, X) -> np.ndarray:
    return np.asarray(X, dtype=float) @ model.coef + model.intercept
