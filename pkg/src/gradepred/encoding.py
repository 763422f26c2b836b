"""Leakage-safe design-matrix encoding.

Two policies exist.  ``"fm"`` keeps every id one-hot, encodes ordinal fields
categorically and leaves absent real values out of the row.  ``"dense"``
(every other model) drops the high-cardinality id-like fields, treats ordinal
fields as numbers and median-imputes absent reals before z-scoring.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.sparse as sp

log = logging.getLogger(__name__)

POLICIES = ("fm", "dense")
KINDS = ("categorical", "real", "ordinal")


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    models: frozenset = frozenset(POLICIES)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        bad = set(self.models) - set(POLICIES)
        if bad:
            raise ValueError(f"feature {self.name!r}: unknown policies {sorted(bad)}")

    def kind_for(self, policy: str) -> str:
        if self.kind == "ordinal":
            return "categorical" if policy == "fm" else "real"
        return self.kind


FM_ONLY = frozenset({"fm"})

DEFAULT_FEATURES: tuple[FeatureSpec, ...] = (
    FeatureSpec("sid", "categorical", FM_ONLY),
    FeatureSpec("cid", "categorical", FM_ONLY),
    FeatureSpec("iid", "categorical", FM_ONLY),
    FeatureSpec("zip", "categorical", FM_ONLY),
    FeatureSpec("hs", "categorical", FM_ONLY),
    FeatureSpec("major", "categorical"),
    FeatureSpec("race", "categorical"),
    FeatureSpec("sex", "categorical"),
    FeatureSpec("transfer", "categorical"),
    FeatureSpec("cdisc", "categorical"),
    FeatureSpec("iclass", "categorical"),
    FeatureSpec("irank", "categorical"),
    FeatureSpec("itenure", "categorical"),
    FeatureSpec("alevel", "ordinal"),
    FeatureSpec("clevel", "ordinal"),
    FeatureSpec("sterm", "ordinal"),
    FeatureSpec("cohort", "ordinal"),
    FeatureSpec("age", "real"),
    FeatureSpec("sat", "real"),
    FeatureSpec("prior_gpa", "real"),
    FeatureSpec("lterm_gpa", "real"),
    FeatureSpec("lterm_cum_gpa", "real"),
    FeatureSpec("lterm_cgpa", "real"),
    FeatureSpec("lterm_cum_cgpa", "real"),
    FeatureSpec("chrs", "real"),
    FeatureSpec("term_chrs", "real"),
    FeatureSpec("total_chrs", "real"),
    FeatureSpec("num_enrolled", "real"),
    FeatureSpec("total_enrolled", "real"),
)

# transcript columns that are never model inputs
NON_FEATURES = {"termnum", "grdpts", "grade", "hsgpa", "institution_id", "season", "year"}


def default_feature_specs(columns=()) -> list[FeatureSpec]:
    """Default specs plus a categorical spec for every unrecognised extra column."""
    specs = list(DEFAULT_FEATURES)
    known = {s.name for s in specs} | NON_FEATURES
    specs += [FeatureSpec(c, "categorical") for c in columns if c not in known]
    return specs


def load_feature_policy(path) -> list[FeatureSpec]:
    """Read a feature-policy JSON file.

    Format::

        {"features": {"<name>": {"kind": "categorical|real|ordinal",
                                 "models": ["fm", "dense"]}, ...},
         "exclude": {"fm": ["<name>", ...], "dense": [...]}}

    Features not listed keep their default spec; ``exclude`` removes a
    feature from the named policy.
    """
    cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    specs = {s.name: s for s in DEFAULT_FEATURES}
    for name, entry in cfg.get("features", {}).items():
        base = specs.get(name)
        kind = entry.get("kind", base.kind if base else "categorical")
        models = frozenset(entry.get("models", base.models if base else POLICIES))
        specs[name] = FeatureSpec(name, kind, models)
    for policy, names in cfg.get("exclude", {}).items():
        for name in names:
            if name not in specs:
                raise EncodingError(f"exclude list names unknown feature {name!r}")
            s = specs[name]
            specs[name] = replace(s, models=s.models - {policy})
    return list(specs.values())


@dataclass(frozen=True)
class RealStats:
    median: float
    mean: float  # over present values
    std: float
    imputed_mean: float  # over median-imputed values
    imputed_std: float
    n_present: int = 1
    varies: bool = True  # False: no training support, values treated as absent


@dataclass(frozen=True)
class Block:
    feature: str
    kind: str
    start: int
    width: int


@dataclass(frozen=True)
class EncoderState:
    specs: tuple[FeatureSpec, ...]
    categories: dict[str, tuple[str, ...]]
    reals: dict[str, RealStats]
    warnings: tuple[str, ...] = ()

    @property
    def feature_names(self) -> list[str]:
        return [s.name for s in self.specs]

    def layout(self, policy: str) -> list[Block]:
        if policy not in POLICIES:
            raise EncodingError(f"unknown policy {policy!r}")
        blocks, start = [], 0
        for s in self.specs:
            if policy not in s.models:
                continue
            kind = s.kind_for(policy)
            width = len(self.categories[s.name]) if kind == "categorical" else 1
            blocks.append(Block(s.name, kind, start, width))
            start += width
        return blocks

    def n_columns(self, policy: str) -> int:
        return sum(b.width for b in self.layout(policy))

    def column_names(self, policy: str) -> list[str]:
        names = []
        for b in self.layout(policy):
            if b.kind == "categorical":
                names += [f"{b.feature}={c}" for c in self.categories[b.feature]]
            else:
                names.append(b.feature)
        return names

    def column_features(self, policy: str) -> np.ndarray:
        """Source-feature name for every column, for block-level aggregation."""
        out = []
        for b in self.layout(policy):
            out += [b.feature] * b.width
        return np.array(out, dtype=object)


@dataclass
class DesignMatrix:
    X: sp.csr_matrix
    y: np.ndarray
    meta: pd.DataFrame
    columns: list[str] = field(default_factory=list)
    column_features: np.ndarray = field(default_factory=lambda: np.array([], dtype=object))
    policy: str = "dense"

    @property
    def shape(self):
        return self.X.shape

    def dense(self) -> np.ndarray:
        return self.X.toarray()


def _as_category_strings(values: pd.Series) -> pd.Series:
    out = values.astype(object).where(values.notna(), None)
    return out.map(lambda v: None if v is None else (str(int(v)) if isinstance(v, (bool, np.bool_)) else str(v)))


def _cat_key(c: str):
    try:
        return (0, float(c), c)
    except ValueError:
        return (1, 0.0, c)


def fit_encoder(rows: pd.DataFrame, specs=None) -> EncoderState:
    """Fit category tables and real-valued statistics on training rows only."""
    if rows is None or len(rows) == 0:
        raise EncodingError("cannot fit encoder on an empty training set")
    specs = tuple(default_feature_specs(rows.columns) if specs is None else specs)
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise EncodingError("feature spec names must be unique")
    cats, reals, warns = {}, {}, []
    for s in specs:
        if s.name not in rows.columns:
            warns.append(f"{s.name}: column absent from training rows")
            col = pd.Series(np.nan, index=rows.index)
        else:
            col = rows[s.name]
        if s.kind in ("categorical", "ordinal"):
            vals = _as_category_strings(col).dropna().unique()
            cats[s.name] = tuple(sorted(vals, key=_cat_key))
        if s.kind in ("real", "ordinal"):
            v = pd.to_numeric(col, errors="coerce").to_numpy(dtype=float)
            present = v[~np.isnan(v)]
            if present.size == 0:
                warns.append(f"{s.name}: no observed values; median set to 0")
                reals[s.name] = RealStats(0.0, 0.0, 1.0, 0.0, 1.0, 0, False)
                continue
            med = float(np.median(present))
            imputed = np.where(np.isnan(v), med, v)
            std = float(present.std())
            istd = float(imputed.std())
            reals[s.name] = RealStats(
                med, float(present.mean()), std if std > 0 else 1.0,
                float(imputed.mean()), istd if istd > 0 else 1.0, int(present.size), std > 0,
            )
    for w in warns:
        log.debug("fit_encoder: %s", w)
    return EncoderState(specs, cats, reals, tuple(warns))


def select_features(state: EncoderState, keep) -> EncoderState:
    """Restrict an encoder to the named features; column indices are recompacted."""
    keep = set(keep)
    if not keep:
        raise EncodingError("feature selection must keep at least one feature")
    unknown = keep - set(state.feature_names)
    if unknown:
        raise EncodingError(f"unknown feature(s): {sorted(unknown)}")
    specs = tuple(s for s in state.specs if s.name in keep)
    return EncoderState(
        specs,
        {k: v for k, v in state.categories.items() if k in keep},
        {k: v for k, v in state.reals.items() if k in keep},
        state.warnings,
    )


META_COLUMNS = ("sid", "cid", "termnum", "transfer", "cohort", "cs_class")


def encode(rows: pd.DataFrame, state: EncoderState, policy: str = "dense") -> DesignMatrix:
    """Encode rows into a sparse design matrix under the given policy.

    Unseen categories yield an all-zero block.  Clipping of predictions is
    not an encoding concern and happens in the evaluation harness.
    """
    if policy not in POLICIES:
        policy = "fm" if policy.startswith("fm") else "dense"
    n = len(rows)
    data, ridx, cidx = [], [], []
    arange = np.arange(n)
    for b in state.layout(policy):
        col = rows[b.feature] if b.feature in rows.columns else pd.Series(np.nan, index=rows.index)
        if b.kind == "categorical":
            codes = pd.Categorical(_as_category_strings(col), categories=list(state.categories[b.feature])).codes
            hit = codes >= 0
            ridx.append(arange[hit])
            cidx.append(b.start + codes[hit].astype(np.int64))
            data.append(np.ones(int(hit.sum())))
        else:
            st = state.reals[b.feature]
            v = pd.to_numeric(col, errors="coerce").to_numpy(dtype=float)
            if not st.varies:
                # constant or unobserved in training: no weight can be learned for it
                v = np.full(n, np.nan)
            if policy == "fm":
                hit = ~np.isnan(v)
                ridx.append(arange[hit])
                cidx.append(np.full(int(hit.sum()), b.start, dtype=np.int64))
                data.append((v[hit] - st.mean) / st.std)
            else:
                v = np.where(np.isnan(v), st.median, v)
                ridx.append(arange)
                cidx.append(np.full(n, b.start, dtype=np.int64))
                data.append((v - st.imputed_mean) / st.imputed_std)
    p = state.n_columns(policy)
    if data:
        X = sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(ridx), np.concatenate(cidx))), shape=(n, p)
        )
    else:
        X = sp.csr_matrix((n, p))
    X.sort_indices()
    y = rows["grdpts"].to_numpy(dtype=float) if "grdpts" in rows.columns else np.full(n, np.nan)
    meta = pd.DataFrame({c: rows[c].to_numpy() for c in META_COLUMNS if c in rows.columns})
    return DesignMatrix(X, y, meta, state.column_names(policy), state.column_features(policy), policy)
