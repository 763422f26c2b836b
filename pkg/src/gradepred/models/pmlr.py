"""Personalized multi-linear regression with a global intercept.

Prediction for student i in course j with content vector x::

    w0 + s_i + c_j + P_i . (W x)

``P_i`` mixes ``k`` shared linear models per student.  Every parameter is
kept non-negative by projecting onto ``max(0, .)`` after each update.  The
objective is squared error plus ``lam_w (|P|^2 + |W|^2) + lam_b (|s|^2 + |c|^2)``;
each stochastic step carries its share of the penalty (per-entity penalties
divided by the entity's training count).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class PMLRModel:
    w0: float
    student_bias: np.ndarray
    course_bias: np.ndarray
    P: np.ndarray
    W: np.ndarray
    student_index: dict
    course_index: dict
    epoch_min: np.ndarray | None = None  # smallest parameter after each epoch

    @property
    def k(self) -> int:
        return self.W.shape[0]


@njit(cache=True)
def _fit(si, ci, X, y, w0, s, c, P, W, lam_w, lam_b, lr, decay, epochs, seed, epoch_min):
    np.random.seed(seed)
    n, p = X.shape
    k = W.shape[0]
    ns = len(s)
    nc = len(c)
    n_s = np.zeros(ns)
    n_c = np.zeros(nc)
    for r in range(n):
        n_s[si[r]] += 1.0
        n_c[ci[r]] += 1.0
    z = np.zeros(k)
    rate = lr
    for ep in range(epochs):
        order = np.random.permutation(n)
        for t in range(n):
            r = order[t]
            i = si[r]
            j = ci[r]
            pred = w0 + s[i] + c[j]
            for l in range(k):
                acc = 0.0
                for f in range(p):
                    acc += W[l, f] * X[r, f]
                z[l] = acc
                pred += P[i, l] * acc
            e = pred - y[r]
            w0 = max(0.0, w0 - rate * 2.0 * e)
            s[i] = max(0.0, s[i] - rate * 2.0 * (e + lam_b * s[i] / n_s[i]))
            c[j] = max(0.0, c[j] - rate * 2.0 * (e + lam_b * c[j] / n_c[j]))
            for l in range(k):
                pil = P[i, l]
                P[i, l] = max(0.0, pil - rate * 2.0 * (e * z[l] + lam_w * pil / n_s[i]))
                g = e * pil
                for f in range(p):
                    W[l, f] = max(0.0, W[l, f] - rate * 2.0 * (g * X[r, f] + lam_w * W[l, f] / n))
        if not np.isfinite(w0):
            return ep, w0
        m = w0
        for v in s:
            m = min(m, v)
        for v in c:
            m = min(m, v)
        for v in P.ravel():
            m = min(m, v)
        for v in W.ravel():
            m = min(m, v)
        epoch_min[ep] = m
        rate *= decay
    return -1, w0


def pmlr_fit(sids, cids, X, y, k: int = 4, lam_w: float = 0.01, lam_b: float = 0.5,
             lr: float = 0.001, epochs: int = 500, decay: float = 1.0, seed: int = 0) -> PMLRModel:
    if k <= 0:
        raise ValueError("PMLR needs k >= 1 regression models")
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("PMLR fit needs at least one row")
    s_uni, si = np.unique(np.asarray(sids).astype(str), return_inverse=True)
    c_uni, ci = np.unique(np.asarray(cids).astype(str), return_inverse=True)
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.0, 0.01, size=len(s_uni))
    c = rng.uniform(0.0, 0.01, size=len(c_uni))
    W = rng.uniform(0.0, 0.01, size=(k, X.shape[1]))
    P = np.full((len(s_uni), k), 1.0 / k)
    w0 = max(0.0, float(y.mean()))
    epoch_min = np.zeros(epochs)
    status, w0 = _fit(si.astype(np.int64), ci.astype(np.int64), X, y, w0, s, c, P, W,
                      float(lam_w), float(lam_b), float(lr), float(decay), int(epochs), int(seed), epoch_min)
    if status >= 0:
        raise FloatingPointError(f"PMLR diverged in epoch {status}")
    return PMLRModel(float(w0), s, c, P, W,
                     {v: i for i, v in enumerate(s_uni.tolist())},
                     {v: j for j, v in enumerate(c_uni.tolist())}, epoch_min)


def pmlr_components(model: PMLRModel, sids, cids, X):
    """Per-row (intercept, student bias, course bias, per-feature contributions)."""
    X = np.asarray(X, dtype=float)
    si = np.array([model.student_index.get(v, -1) for v in np.asarray(sids).astype(str)])
    ci = np.array([model.course_index.get(v, -1) for v in np.asarray(cids).astype(str)])
    sb = np.where(si >= 0, model.student_bias[np.maximum(si, 0)], 0.0)
    cb = np.where(ci >= 0, model.course_bias[np.maximum(ci, 0)], 0.0)
    Pi = np.where((si >= 0)[:, None], model.P[np.maximum(si, 0)], 1.0 / model.k)
    mix = Pi @ model.W  # effective per-row coefficient vector
    return model.w0, sb, cb, mix * X


def pmlr_predict(model: PMLRModel, sids, cids, X) -> np.ndarray:
    """Unseen students get zero bias and uniform membership; unseen courses zero bias."""
    w0, sb, cb, contrib = pmlr_components(model, sids, cids, X)
    return w0 + sb + cb + contrib.sum(axis=1)
