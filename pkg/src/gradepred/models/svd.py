"""Funk-style SVD on the student-course grade matrix, with kNN post-processing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class SVDModel:
    student_index: dict
    course_index: dict
    student_factors: np.ndarray
    course_factors: np.ndarray

    @property
    def k(self) -> int:
        return self.student_factors.shape[1]


@njit(cache=True)
def _sgd(si, ci, y, P, Q, lr, reg, epochs, seed):
    np.random.seed(seed)
    n = len(y)
    k = P.shape[1]
    for _ in range(epochs):
        order = np.random.permutation(n)
        for t in range(n):
            r = order[t]
            s = si[r]
            c = ci[r]
            pred = 0.0
            for f in range(k):
                pred += P[s, f] * Q[c, f]
            err = y[r] - pred
            for f in range(k):
                pu = P[s, f]
                qv = Q[c, f]
                P[s, f] += lr * (err * qv - reg * pu)
                Q[c, f] += lr * (err * pu - reg * qv)


def svd_fit(sids, cids, grades, k: int = 8, epochs: int = 50, lr: float = 0.005,
            reg: float = 0.02, seed: int = 0, init_std: float = 0.1) -> SVDModel:
    """Fit ``G_ij ~ v_i . v_j`` by stochastic updates over observed entries.

    Factors start at ``sqrt(mean / k)`` plus Gaussian jitter so the initial
    dot products sit near the grade mean.
    """
    if k <= 0:
        raise ValueError("SVD rank k must be positive")
    y = np.asarray(grades, dtype=float)
    if y.size == 0:
        raise ValueError("SVD fit needs a nonempty training set")
    s_codes, s_uni = _codes(sids)
    c_codes, c_uni = _codes(cids)
    rng = np.random.default_rng(seed)
    base = np.sqrt(max(float(y.mean()), 0.0) / k)
    P = base + rng.normal(0.0, init_std, size=(len(s_uni), k))
    Q = base + rng.normal(0.0, init_std, size=(len(c_uni), k))
    _sgd(s_codes, c_codes, y, P, Q, float(lr), float(reg), int(epochs), int(seed))
    return SVDModel(
        {s: i for i, s in enumerate(s_uni)}, {c: j for j, c in enumerate(c_uni)}, P, Q
    )


def _codes(ids):
    uni, codes = np.unique(np.asarray(ids, dtype=object).astype(str), return_inverse=True)
    return codes.astype(np.int64), uni.tolist()


def svd_predict(model: SVDModel, student, course) -> float | None:
    """Dot product of the latent vectors, or ``None`` if either id is unseen."""
    i = model.student_index.get(student)
    j = model.course_index.get(course)
    if i is None or j is None:
        return None
    return float(model.student_factors[i] @ model.course_factors[j])


def _cosine(a: np.ndarray, B: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(B, axis=1)
    denom = na * nb
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(denom > 0, (B @ a) / np.where(denom > 0, denom, 1.0), 0.0)
    return cos


def svdknn_predict(model: SVDModel, student, course, history) -> float | None:
    """Replace the target course by the most similar course the student completed.

    ``history`` maps a student id to the courses that student took in the
    training terms.  Similarity is cosine similarity of course factors; ties
    go to the first course in sorted order.
    """
    i = model.student_index.get(student)
    j = model.course_index.get(course)
    taken = sorted(c for c in history.get(student, ()) if c in model.course_index)
    if i is None or j is None or not taken:
        return svd_predict(model, student, course)
    cand = np.array([model.course_index[c] for c in taken])
    cos = _cosine(model.course_factors[j], model.course_factors[cand])
    best = cand[int(np.argmax(cos))]
    return float(model.student_factors[i] @ model.course_factors[best])


def svd_predict_many(model: SVDModel, sids, cids) -> np.ndarray:
    """Vectorised :func:`svd_predict`; absent predictions are NaN."""
    si = np.array([model.student_index.get(s, -1) for s in sids], dtype=np.int64)
    ci = np.array([model.course_index.get(c, -1) for c in cids], dtype=np.int64)
    ok = (si >= 0) & (ci >= 0)
    out = np.full(len(si), np.nan)
    out[ok] = np.einsum("nk,nk->n", model.student_factors[si[ok]], model.course_factors[ci[ok]])
    return out


def svdknn_predict_many(model: SVDModel, sids, cids, history) -> np.ndarray:
    out = np.array([svdknn_predict(model, s, c, history) for s, c in zip(sids, cids)], dtype=object)
    return np.array([np.nan if v is None else v for v in out], dtype=float)
