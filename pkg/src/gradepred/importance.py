"""Mean Absolute Deviation Importance (MADImp) and forest Gini importance.

For one prediction row, every additive term that moves the prediction away
from the intercept is charged to the features it involves: a 1-way term
``w_f x_f`` entirely to ``f``, a 2-way term ``x_f x_f' <v_f, v_f'>`` split
between ``f`` and ``f'`` in proportion ``|x_f| / (|x_f| + |x_f'|)`` (half and
half for one-hot rows).  Shares are the charged absolute values divided by the
row's total absolute deviation, so they sum to one.  Row shares are averaged
over records, then across terms weighted by the number of predicted records.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.sparse as sp
from numba import njit

from .models.fm import FMModel
from .models.forest import ForestModel, split_gains

ALWAYS_KEEP = ("sid", "cid")


@dataclass(frozen=True)
class TermDecomposition:
    """Additive terms of one prediction: intercept, 1-way and 2-way contributions."""

    intercept: float
    one_way: dict  # feature -> w_f * x_f
    two_way: dict  # (f, f') -> x_f * x_f' * Z[f, f']
    x: dict  # feature -> x_f

    @property
    def prediction(self) -> float:
        return self.intercept + sum(self.one_way.values()) + sum(self.two_way.values())


def fm_decompose(model: FMModel, active: dict) -> TermDecomposition:
    """Decompose an FM prediction for a row given as ``{column: value}``."""
    cols = sorted(c for c, v in active.items() if v != 0)
    one = {c: float(model.w[c] * active[c]) for c in cols}
    two = {}
    for a_i, a in enumerate(cols):
        for b in cols[a_i + 1:]:
            two[(a, b)] = float(active[a] * active[b] * (model.V[a] @ model.V[b]))
    return TermDecomposition(model.w0, one, two, {c: float(active[c]) for c in cols})


def madimp_row(dec: TermDecomposition) -> dict:
    """Per-feature share of the row's total absolute deviation from the intercept."""
    shares = {f: abs(v) for f, v in dec.one_way.items()}
    for f in dec.x:
        shares.setdefault(f, 0.0)
    total = sum(abs(v) for v in dec.one_way.values())
    for (a, b), v in dec.two_way.items():
        z = abs(v)
        total += z
        xa, xb = abs(dec.x.get(a, 0.0)), abs(dec.x.get(b, 0.0))
        if z == 0.0 or xa + xb == 0.0:
            continue
        shares[a] = shares.get(a, 0.0) + z * xa / (xa + xb)
        shares[b] = shares.get(b, 0.0) + z * xb / (xa + xb)
    if total == 0.0:
        return {f: 0.0 for f in shares}
    return {f: v / total for f, v in shares.items()}


@njit(cache=True)
def _fm_row_parts(indptr, indices, data, w, V, one, two, total):
    k = V.shape[1]
    for i in range(len(indptr) - 1):
        lo = indptr[i]
        hi = indptr[i + 1]
        t = 0.0
        for a in range(lo, hi):
            one[a] = abs(w[indices[a]] * data[a])
            two[a] = 0.0
            t += one[a]
        for a in range(lo, hi):
            xa = data[a]
            ca = indices[a]
            for b in range(a + 1, hi):
                xb = data[b]
                cb = indices[b]
                z = 0.0
                for f in range(k):
                    z += V[ca, f] * V[cb, f]
                z = abs(xa * xb * z)
                t += z
                denom = abs(xa) + abs(xb)
                if z > 0.0 and denom > 0.0:
                    two[a] += z * abs(xa) / denom
                    two[b] += z * abs(xb) / denom
        total[i] = t


@dataclass
class RowShares:
    """Per-row MADImp shares in the sparsity pattern of the design matrix."""

    one_way: sp.csr_matrix
    two_way: sp.csr_matrix
    valid: np.ndarray  # rows with nonzero total deviation
    column_features: np.ndarray

    @property
    def shares(self) -> sp.csr_matrix:
        return (self.one_way + self.two_way).tocsr()

    def column_means(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean 1-way and 2-way share per column over valid rows."""
        m = max(int(self.valid.sum()), 1)
        keep = sp.diags(self.valid.astype(float))
        one = np.asarray((keep @ self.one_way).sum(axis=0)).ravel() / m
        two = np.asarray((keep @ self.two_way).sum(axis=0)).ravel() / m
        return one, two


def fm_row_shares(model: FMModel, X, column_features) -> RowShares:
    X = sp.csr_matrix(X, dtype=np.float64)
    X.sort_indices()
    one = np.zeros(X.nnz)
    two = np.zeros(X.nnz)
    total = np.zeros(X.shape[0])
    _fm_row_parts(X.indptr.astype(np.int64), X.indices.astype(np.int64), X.data,
                  np.asarray(model.w, float), np.asarray(model.V, float), one, two, total)
    valid = total > 0
    inv = np.where(valid, 1.0 / np.where(valid, total, 1.0), 0.0)
    row_of = np.repeat(np.arange(X.shape[0]), np.diff(X.indptr))
    mk = lambda v: sp.csr_matrix((v * inv[row_of], X.indices, X.indptr), shape=X.shape)
    return RowShares(mk(one), mk(two), valid, np.asarray(column_features, dtype=object))


def additive_row_shares(contributions, column_features) -> RowShares:
    """MADImp for models without interactions: shares are |contribution| / sum |contribution|."""
    C = np.abs(np.asarray(contributions, dtype=float))
    total = C.sum(axis=1)
    valid = total > 0
    S = np.where(valid[:, None], C / np.where(valid, total, 1.0)[:, None], 0.0)
    S = sp.csr_matrix(S)
    return RowShares(S, sp.csr_matrix(S.shape), valid, np.asarray(column_features, dtype=object))


@dataclass
class ImportanceReport:
    """Feature shares, aggregated over terms, plus the per-term evolution."""

    method: str
    shares: pd.Series  # feature -> share, descending
    per_term: pd.DataFrame  # columns: termnum, feature, share, n
    one_way: pd.Series | None = None
    two_way: pd.Series | None = None
    level: str = "block"
    scope: str = "aggregate"
    meta: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"feature": self.shares.index, "share": self.shares.to_numpy()})
        if self.one_way is not None:
            df["one_way"] = self.one_way.reindex(self.shares.index).fillna(0.0).to_numpy()
            df["two_way"] = self.two_way.reindex(self.shares.index).fillna(0.0).to_numpy()
        df["scope"] = self.scope
        return df

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n", float_format="%.10g")

    def per_term_csv(self, path) -> None:
        self.per_term.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")

    def to_json(self) -> str:
        body = {
            "method": self.method,
            "level": self.level,
            "scope": self.scope,
            "shares": {k: float(v) for k, v in self.shares.items()},
            "per_term": self.per_term.to_dict(orient="records"),
            **self.meta,
        }
        if self.one_way is not None:
            body["one_way"] = {k: float(v) for k, v in self.one_way.items()}
            body["two_way"] = {k: float(v) for k, v in self.two_way.items()}
        return json.dumps(body, sort_keys=True, indent=1)


def _block_sum(values: np.ndarray, column_features) -> pd.Series:
    return pd.Series(values, index=pd.Index(np.asarray(column_features, dtype=object), name="feature")).groupby(
        level=0, sort=True
    ).sum()


def madimp_aggregate(term_rows: dict, term_sizes: dict | None = None, grouping: str = "block",
                     method: str = "madimp") -> ImportanceReport:
    """Combine per-row shares of several terms into one report.

    ``term_rows`` maps a term number to its :class:`RowShares`.  Within a term
    shares are averaged over valid rows; across terms the term means are
    weighted by ``term_sizes`` (the number of records predicted in each term,
    defaulting to the number of valid rows).
    """
    if not term_rows:
        raise ValueError("no rows to aggregate")
    per_term, ones, twos, weights = [], [], [], []
    for term in sorted(term_rows):
        rs = term_rows[term]
        one, two = rs.column_means()
        labels = rs.column_features if grouping == "block" else np.array(
            [f"{f}#{i}" for i, f in enumerate(rs.column_features)], dtype=object)
        o = _block_sum(one, labels)
        t = _block_sum(two, labels)
        n = int(term_sizes[term]) if term_sizes is not None else int(rs.valid.sum())
        ones.append(o)
        twos.append(t)
        weights.append(n)
        tot = o.add(t, fill_value=0.0)
        per_term.append(pd.DataFrame({"termnum": term, "feature": tot.index, "share": tot.to_numpy(), "n": n}))
    w = np.asarray(weights, dtype=float)
    w = w / w.sum() if w.sum() > 0 else np.full(len(w), 1.0 / len(w))
    one = sum(o * wi for o, wi in zip(_align(ones), w))
    two = sum(t * wi for t, wi in zip(_align(twos), w))
    total = (one + two).sort_values(ascending=False, kind="mergesort")
    return ImportanceReport(
        method, total, pd.concat(per_term, ignore_index=True),
        one.reindex(total.index), two.reindex(total.index), grouping,
    )


def _align(series_list):
    idx = sorted(set().union(*[s.index for s in series_list]))
    return [s.reindex(idx).fillna(0.0) for s in series_list]


def madimp_select(report: ImportanceReport, threshold: float = 0.001, top_n: int | None = None,
                  always=ALWAYS_KEEP) -> set:
    """Features whose aggregate share reaches ``threshold`` (or the ``top_n`` largest)."""
    shares = report.shares.sort_values(ascending=False, kind="mergesort")
    if top_n is not None:
        keep = set(shares.index[:top_n])
    else:
        keep = set(shares.index[shares.to_numpy() >= threshold])
    keep |= {f for f in always if f in shares.index}
    if not keep:
        raise ValueError("feature selection kept nothing")
    return keep


def gini_importance(forests: dict, term_sizes: dict | None = None) -> ImportanceReport:
    """Normalized squared-error reduction per feature, averaged across terms.

    ``forests`` maps a term number to ``(ForestModel, column_features)``.
    """
    if not forests:
        raise ValueError("no forests given")
    per_term, series, weights = [], [], []
    for term in sorted(forests):
        model, cols = forests[term]
        if not isinstance(model, ForestModel):
            raise TypeError("gini_importance needs ForestModel instances")
        g = split_gains(model)
        if g.sum() <= 0:
            raise ValueError(f"term {term}: forest has no splits, Gini importance undefined")
        s = _block_sum(g / g.sum(), cols)
        n = int(term_sizes[term]) if term_sizes is not None else 1
        series.append(s)
        weights.append(n)
        per_term.append(pd.DataFrame({"termnum": term, "feature": s.index, "share": s.to_numpy(), "n": n}))
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    total = sum(s * wi for s, wi in zip(_align(series), w)).sort_values(ascending=False, kind="mergesort")
    return ImportanceReport("gini", total, pd.concat(per_term, ignore_index=True))
