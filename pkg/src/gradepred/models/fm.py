"""Second-order factorization machine learned by Gibbs sampling.

Model::

    y(x) = w0 + sum_l w_l x_l + sum_{l < l'} x_l x_l' <v_l, v_l'>

Inference follows the usual fully Bayesian scheme: Gaussian likelihood with
Gamma-distributed noise precision, Gaussian priors on ``w`` and on each
factor column of ``V`` whose mean and precision are themselves resampled every
sweep (Normal-Gamma hyperpriors), and a flat prior on the intercept.  The
reported prediction is the average over post-burn-in draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numba import njit

# Normal-Gamma hyperprior constants
ALPHA0 = 1.0
BETA0 = 1.0
GAMMA0 = 1.0
MU0 = 0.0


@dataclass(frozen=True)
class FMModel:
    w0: float
    w: np.ndarray
    V: np.ndarray
    n_draws: int = 0
    noise_precision: float = float("nan")
    # MCMC-averaged predictions for the matrix passed as ``X_pred`` to fm_fit
    pred_mean: np.ndarray | None = field(default=None, repr=False)

    @property
    def p(self) -> int:
        return len(self.w)

    @property
    def k(self) -> int:
        return self.V.shape[1]

    def pairwise(self, a: int, b: int) -> float:
        return float(self.V[a] @ self.V[b])


class SamplerDivergence(FloatingPointError):
    pass


@njit(cache=True)
def _residuals(indptr, indices, data, y, w0, w, V, q, e):
    n = len(y)
    k = V.shape[1]
    for i in range(n):
        lin = w0
        for f in range(k):
            q[i, f] = 0.0
        sq = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            l = indices[jj]
            x = data[jj]
            lin += w[l] * x
            for f in range(k):
                q[i, f] += V[l, f] * x
                sq += V[l, f] * V[l, f] * x * x
        inter = 0.0
        for f in range(k):
            inter += q[i, f] * q[i, f]
        e[i] = y[i] - (lin + 0.5 * (inter - sq))


@njit(cache=True)
def _predict(indptr, indices, data, w0, w, V, out):
    n = len(out)
    k = V.shape[1]
    for i in range(n):
        lin = w0
        inter = 0.0
        for f in range(k):
            s = 0.0
            s2 = 0.0
            for jj in range(indptr[i], indptr[i + 1]):
                vx = V[indices[jj], f] * data[jj]
                s += vx
                s2 += vx * vx
            inter += s * s - s2
        for jj in range(indptr[i], indptr[i + 1]):
            lin += w[indices[jj]] * data[jj]
        out[i] = lin + 0.5 * inter


@njit(cache=True)
def _draw_hyper(vals, mu):
    """Sample (mean, precision) of a parameter group under a Normal-Gamma hyperprior."""
    p = len(vals)
    ss = 0.0
    total = 0.0
    for v in vals:
        ss += (v - mu) ** 2
        total += v
    shape = (ALPHA0 + p + 1.0) / 2.0
    rate = (BETA0 + ss + GAMMA0 * (mu - MU0) ** 2) / 2.0
    lam = np.random.gamma(shape, 1.0 / rate)
    mu_n = (total + GAMMA0 * MU0) / (p + GAMMA0)
    mu = np.random.normal(mu_n, np.sqrt(1.0 / ((p + GAMMA0) * lam)))
    return mu, lam


@njit(cache=True)
def _gibbs(r_indptr, r_indices, r_data, c_indptr, c_rows, c_data, y,
           p_indptr, p_indices, p_data,
           k, n_iter, burn_in, init_std, seed):
    np.random.seed(seed)
    n = len(y)
    p = len(c_indptr) - 1
    n_pred = len(p_indptr) - 1
    w0 = 0.0
    w = np.zeros(p)
    V = np.empty((p, k))
    for l in range(p):
        for f in range(k):
            V[l, f] = np.random.normal(0.0, init_std)
    q = np.zeros((n, k))
    e = np.zeros(n)
    w0_sum = 0.0
    w_sum = np.zeros(p)
    V_sum = np.zeros((p, k))
    pred_sum = np.zeros(n_pred)
    pred = np.zeros(n_pred)
    alpha_sum = 0.0
    draws = 0
    h = np.zeros(n)
    mu_w = 0.0
    mu_v = np.zeros(k)
    for it in range(n_iter):
        _residuals(r_indptr, r_indices, r_data, y, w0, w, V, q, e)
        # noise precision
        sse = 0.0
        for i in range(n):
            sse += e[i] * e[i]
        alpha = np.random.gamma((ALPHA0 + n) / 2.0, 2.0 / (BETA0 + sse))
        if not np.isfinite(alpha) or not np.isfinite(sse):
            return it, w0, w, V, pred_sum, 0, alpha_sum
        # intercept (flat prior)
        if n > 0:
            s = 0.0
            for i in range(n):
                s += e[i] + w0
            new = np.random.normal(s / n, np.sqrt(1.0 / (alpha * n)))
            d = new - w0
            for i in range(n):
                e[i] -= d
            w0 = new
        # linear weights
        mu_w, lam_w = _draw_hyper(w, mu_w)
        for l in range(p):
            s_hh = 0.0
            s_eh = 0.0
            for jj in range(c_indptr[l], c_indptr[l + 1]):
                x = c_data[jj]
                i = c_rows[jj]
                s_hh += x * x
                s_eh += (e[i] + w[l] * x) * x
            var = 1.0 / (lam_w + alpha * s_hh)
            new = np.random.normal(var * (alpha * s_eh + mu_w * lam_w), np.sqrt(var))
            d = new - w[l]
            for jj in range(c_indptr[l], c_indptr[l + 1]):
                e[c_rows[jj]] -= d * c_data[jj]
            w[l] = new
        # factors, one column of V at a time
        for f in range(k):
            mu_f, lam_f = _draw_hyper(V[:, f], mu_v[f])
            mu_v[f] = mu_f
            for l in range(p):
                s_hh = 0.0
                s_eh = 0.0
                v = V[l, f]
                for jj in range(c_indptr[l], c_indptr[l + 1]):
                    x = c_data[jj]
                    i = c_rows[jj]
                    hi = x * (q[i, f] - v * x)
                    h[jj - c_indptr[l]] = hi
                    s_hh += hi * hi
                    s_eh += (e[i] + v * hi) * hi
                var = 1.0 / (lam_f + alpha * s_hh)
                new = np.random.normal(var * (alpha * s_eh + mu_f * lam_f), np.sqrt(var))
                d = new - v
                for jj in range(c_indptr[l], c_indptr[l + 1]):
                    i = c_rows[jj]
                    e[i] -= d * h[jj - c_indptr[l]]
                    q[i, f] += d * c_data[jj]
                V[l, f] = new
        if not np.isfinite(w0):
            return it, w0, w, V, pred_sum, 0, alpha_sum
        if it >= burn_in:
            draws += 1
            w0_sum += w0
            alpha_sum += alpha
            for l in range(p):
                w_sum[l] += w[l]
                for f in range(k):
                    V_sum[l, f] += V[l, f]
            if n_pred > 0:
                _predict(p_indptr, p_indices, p_data, w0, w, V, pred)
                for i in range(n_pred):
                    pred_sum[i] += pred[i]
    if draws == 0:
        draws = 1
        w0_sum, w_sum, V_sum = w0, w.copy(), V.copy()
    return -1, w0_sum / draws, w_sum / draws, V_sum / draws, pred_sum / draws, draws, alpha_sum / draws


def _csr(X) -> sp.csr_matrix:
    X = sp.csr_matrix(X, dtype=np.float64)
    X.sort_indices()
    return X


def fm_fit(X, y, k: int = 8, iterations: int = 200, init_std: float = 0.2, seed: int = 0,
           X_pred=None, burn_in: int | None = None) -> FMModel:
    """Fit an FM by Gibbs sampling.

    ``X_pred``, when given, is predicted at every post-burn-in draw and the
    draw-averaged predictions are kept on the returned model as
    ``pred_mean``.  The stored ``w0``/``w``/``V`` are posterior means.
    """
    if k < 1:
        raise ValueError("FM rank k must be >= 1")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    X = _csr(X)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] == 0 or X.shape[0] != len(y):
        raise ValueError("FM fit needs a nonempty matrix aligned with its targets")
    Xc = X.tocsc()
    Xc.sort_indices()
    P = _csr(X_pred) if X_pred is not None else sp.csr_matrix((0, X.shape[1]))
    if P.shape[1] != X.shape[1]:
        raise ValueError("X_pred column count differs from training matrix")
    burn = iterations // 2 if burn_in is None else burn_in
    status, w0, w, V, pred, draws, alpha = _gibbs(
        X.indptr.astype(np.int64), X.indices.astype(np.int64), X.data,
        Xc.indptr.astype(np.int64), Xc.indices.astype(np.int64), Xc.data, y,
        P.indptr.astype(np.int64), P.indices.astype(np.int64), P.data,
        int(k), int(iterations), int(burn), float(init_std), int(seed),
    )
    if status >= 0:
        raise SamplerDivergence(f"non-finite state in Gibbs sweep {status}")
    return FMModel(float(w0), w, V, int(draws), float(alpha), pred if X_pred is not None else None)


def fm_predict(model: FMModel, X) -> np.ndarray:
    """Evaluate the FM equation with the model's parameters in O(k * nnz)."""
    X = _csr(X)
    if X.shape[1] != model.p:
        raise ValueError(f"row width {X.shape[1]} != model width {model.p}")
    out = np.empty(X.shape[0])
    _predict(X.indptr.astype(np.int64), X.indices.astype(np.int64), X.data,
             model.w0, np.asarray(model.w, dtype=float), np.asarray(model.V, dtype=float), out)
    return out
