"""Sequential per-term evaluation: train on every earlier term, predict the next.

Term 0 only ever serves as training data.  For each later term the encoder
and the model are fitted on records from strictly earlier terms, so the
predictions for a term depend on nothing at or after it.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .encoding import encode, fit_encoder, default_feature_specs, select_features
from .importance import (
    RowShares,
    additive_row_shares,
    fm_row_shares,
    madimp_aggregate,
    madimp_select,
)
from .models.baselines import gm_fit, gm_predict, mom_fit, mom_predict, ur_predict
from .models.fm import fm_fit
from .models.forest import rf_fit, rf_predict
from .models.knn import knn_fit, knn_predict
from .models.linear import linear_predict, sgd_fit
from .models.pmlr import pmlr_components, pmlr_fit
from .models.svd import svd_fit, svd_predict_many, svdknn_predict_many
from .transcript import cold_start_classes, with_derived

log = logging.getLogger(__name__)

MODEL_NAMES = ("ur", "gm", "mom", "svd", "svdknn", "fm", "fm-ids-only", "knn", "sgd", "rf", "pmlr", "hybrid")

DEFAULT_PARAMS = {
    "ur": {},
    "gm": {},
    "mom": {},
    "svd": {"k": 8, "epochs": 50, "lr": 0.005, "reg": 0.02},
    "svdknn": {"k": 8, "epochs": 50, "lr": 0.005, "reg": 0.02},
    "fm": {"k": 8, "iterations": 200, "init_std": 0.2},
    "fm-ids-only": {"k": 8, "iterations": 200, "init_std": 0.2},
    "knn": {"k": 20},
    "sgd": {"lr": 0.001, "l1": 0.001, "iterations": 15},
    "rf": {"n_trees": 100, "max_depth": 10},
    "pmlr": {"k": 4, "lam_w": 0.01, "lam_b": 0.5, "lr": 0.001, "epochs": 500, "decay": 1.0},
    "hybrid": {},
}

SEGMENTS = ("overall", "NCS", "CS", "CSS", "CSC", "CSB", "native", "transfer")
DUMP_COLUMNS = ["row", "sid", "cid", "termnum", "true", "raw", "clipped", "cs_class", "transfer", "cohort"]


@dataclass(frozen=True)
class ModelSpec:
    """A model family, its hyperparameters and optional MADImp feature selection."""

    name: str
    params: dict = field(default_factory=dict)
    select_threshold: float | None = None  # fm families only

    def __post_init__(self):
        if self.name not in MODEL_NAMES:
            raise ValueError(f"unknown model {self.name!r}; choose from {', '.join(MODEL_NAMES)}")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.name])
        if unknown:
            raise ValueError(f"{self.name}: unknown hyperparameter(s) {sorted(unknown)}")

    @property
    def settings(self) -> dict:
        return {**DEFAULT_PARAMS[self.name], **self.params}


@dataclass
class Metrics:
    rmse: float
    mae: float
    mae_std: float
    count: int

    def as_dict(self) -> dict:
        return {"rmse": self.rmse, "mae": self.mae, "mae_std": self.mae_std, "count": self.count}


@dataclass
class TermRun:
    term: int
    model: str
    params: dict
    predictions: pd.DataFrame
    importance: object = None  # RowShares, or (ForestModel, column features) for rf
    n_train: int = 0
    features: tuple = ()  # encoded features actually used (fm families)


@dataclass
class EvaluationReport:
    model: str
    segments: dict  # name -> Metrics or None when the segment is empty
    per_term: pd.DataFrame
    heatmap: pd.DataFrame  # cohort, termnum, rmse, count
    skipped_terms: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def metric(self, segment: str = "overall", name: str = "rmse") -> float:
        m = self.segments.get(segment)
        return float("nan") if m is None else getattr(m, name)

    def rmse_matrix(self) -> pd.DataFrame:
        return self.heatmap.pivot(index="cohort", columns="termnum", values="rmse")

    def count_matrix(self) -> pd.DataFrame:
        return self.heatmap.pivot(index="cohort", columns="termnum", values="count").fillna(0).astype(int)

    def to_json(self) -> str:
        body = {
            "model": self.model,
            "params": self.params,
            "segments": {k: (None if v is None else v.as_dict()) for k, v in self.segments.items()},
            "per_term": self.per_term.to_dict(orient="records"),
            "heatmap": self.heatmap.to_dict(orient="records"),
            "skipped_terms": list(self.skipped_terms),
        }
        return json.dumps(body, sort_keys=True, indent=1, default=_json_default)

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        body = json.loads(text)
        segments = {k: (None if v is None else Metrics(**v)) for k, v in body["segments"].items()}
        per_term = pd.DataFrame(body.get("per_term", []), columns=["termnum", "rmse", "mae", "mae_std", "count"])
        heatmap = pd.DataFrame(body.get("heatmap", []), columns=["cohort", "termnum", "rmse", "count"])
        return cls(body.get("model", ""), segments, per_term, heatmap, list(body.get("skipped_terms", [])),
                   body.get("params", {}))

    def segment_frame(self) -> pd.DataFrame:
        rows = []
        for name in SEGMENTS:
            m = self.segments.get(name)
            rows.append({"segment": name, **(m.as_dict() if m else {"rmse": None, "mae": None, "mae_std": None, "count": 0})})
        return pd.DataFrame(rows)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


@dataclass
class Evaluation:
    runs: list
    report: EvaluationReport

    @property
    def dump(self) -> pd.DataFrame:
        return prediction_dump(self.runs)


def clip_prediction(raw):
    """Bound predictions to the grade scale [0, 4]."""
    raw = np.asarray(raw, dtype=float)
    bad = ~np.isfinite(raw)
    if bad.any():
        raise FloatingPointError(f"{int(bad.sum())} non-finite raw prediction(s); the model fit is unusable")
    out = np.minimum(4.0, np.maximum(0.0, raw))
    return float(out) if out.ndim == 0 else out


def compute_metrics(true, pred) -> Metrics:
    true = np.asarray(true, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if true.size == 0:
        raise ValueError("metrics need at least one (true, predicted) pair")
    if true.shape != pred.shape:
        raise ValueError("true and predicted arrays differ in shape")
    err = pred - true
    ae = np.abs(err)
    return Metrics(float(np.sqrt(np.mean(err * err))), float(ae.mean()), float(ae.std()), int(true.size))


def term_seed(seed: int, term: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(term)]).generate_state(1)[0] % (2**31))


# ---------------------------------------------------------------- per-term fits

def _fm_family(spec: ModelSpec, train, test, specs, seed):
    st = spec.settings
    state = fit_encoder(train, specs)
    if spec.name == "fm-ids-only":
        state = select_features(state, {"sid", "cid"})
    Xtr = encode(train, state, "fm")
    if spec.select_threshold is not None:
        first = fm_fit(Xtr.X, Xtr.y, seed=seed, **st)
        rs = fm_row_shares(first, Xtr.X, Xtr.column_features)
        keep = madimp_select(madimp_aggregate({0: rs}), threshold=spec.select_threshold)
        state = select_features(state, keep)
        Xtr = encode(train, state, "fm")
    Xte = encode(test, state, "fm")
    model = fm_fit(Xtr.X, Xtr.y, seed=seed, X_pred=Xte.X, **st)
    return model.pred_mean, (model, Xtr, tuple(sorted(state.feature_names)))


def _dense(train, test, specs):
    state = fit_encoder(train, specs)
    Xtr = encode(train, state, "dense")
    Xte = encode(test, state, "dense")
    return Xtr, Xte


def predict_term(spec: ModelSpec, train: pd.DataFrame, test: pd.DataFrame, seed: int,
                 specs=None, want_importance: bool = False):
    """Raw predictions for ``test`` from a model fitted on ``train``.

    Returns ``(raw, fallback_mask, importance, features)``.  The fallback mask
    marks rows where the model could not predict and the training global mean
    was used; ``features`` lists the encoded features of the fm families.
    """
    name, st = spec.name, spec.settings
    y = train["grdpts"].to_numpy(dtype=float)
    fallback = np.zeros(len(test), dtype=bool)
    imp = None
    used = ()
    if name == "ur":
        raw = ur_predict(test, seed)
    elif name == "gm":
        raw = gm_predict(gm_fit(train), test)
    elif name == "mom":
        raw = mom_predict(mom_fit(train), test)
    elif name in ("svd", "svdknn"):
        model = svd_fit(train["sid"].to_numpy(), train["cid"].to_numpy(), y, seed=seed, **st)
        sids = test["sid"].astype(str).to_numpy()
        cids = test["cid"].astype(str).to_numpy()
        if name == "svd":
            raw = svd_predict_many(model, sids, cids)
        else:
            history = train.groupby(train["sid"].astype(str))["cid"].agg(
                lambda c: sorted(set(c.astype(str)))).to_dict()
            raw = svdknn_predict_many(model, sids, cids, history)
        fallback = np.isnan(raw)
        raw = np.where(fallback, float(y.mean()), raw)
    elif name in ("fm", "fm-ids-only"):
        raw, (model, Xtr, used) = _fm_family(spec, train, test, specs, seed)
        if want_importance:
            imp = fm_row_shares(model, Xtr.X, Xtr.column_features)
    elif name == "knn":
        Xtr, Xte = _dense(train, test, specs)
        raw = knn_predict(knn_fit(Xtr.dense(), y, k=min(st["k"], len(y))), Xte.dense())
    elif name == "sgd":
        Xtr, Xte = _dense(train, test, specs)
        model = sgd_fit(Xtr.dense(), y, seed=seed, **st)
        raw = linear_predict(model, Xte.dense())
        if want_importance:
            imp = additive_row_shares(Xtr.dense() * model.coef, Xtr.column_features)
    elif name == "rf":
        Xtr, Xte = _dense(train, test, specs)
        model = rf_fit(Xtr.dense(), y, seed=seed, **st)
        raw = rf_predict(model, Xte.dense())
        if want_importance:
            imp = (model, Xtr.column_features)
    elif name == "pmlr":
        Xtr, Xte = _dense(train, test, specs)
        model = pmlr_fit(train["sid"].to_numpy(), train["cid"].to_numpy(), Xtr.dense(), y, seed=seed, **st)
        w0, sb, cb, contrib = pmlr_components(model, test["sid"].to_numpy(), test["cid"].to_numpy(), Xte.dense())
        raw = w0 + sb + cb + contrib.sum(axis=1)
        if want_importance:
            _, sb, cb, contrib = pmlr_components(model, train["sid"].to_numpy(), train["cid"].to_numpy(), Xtr.dense())
            cols = np.concatenate([np.array(["sid", "cid"], dtype=object), Xtr.column_features])
            imp = additive_row_shares(np.column_stack([sb, cb, contrib]), cols)
    else:
        raise ValueError(f"{name} is composed from other runs, not fitted per term")
    return np.asarray(raw, dtype=float), fallback, imp, used


# ---------------------------------------------------------------- main loop

def _prepare(frame: pd.DataFrame) -> pd.DataFrame:
    data = with_derived(frame.reset_index(drop=True))
    data.insert(0, "row", np.arange(len(data)))
    if "transfer" not in data.columns:
        data["transfer"] = False
    return data


def summer_terms(frame: pd.DataFrame) -> set:
    if "season" not in frame.columns:
        return set()
    s = frame[["termnum", "season"]].drop_duplicates()
    return set(s.loc[s["season"].astype(str) == "Summer", "termnum"].astype(int))


def sequential_evaluate(frame: pd.DataFrame, spec, seed: int = 0, terms=None, feature_specs=None,
                        want_importance: bool = False, exclude_summers: bool = False) -> Evaluation:
    """Fit-and-predict for every term after the first, then assemble one report.

    ``frame`` holds transcript rows with ``grdpts``; ``spec`` is a
    :class:`ModelSpec` or a model name.  ``terms`` restricts which terms are
    predicted (useful for partial reruns); results for a term never depend on
    the others.
    """
    spec = ModelSpec(spec) if isinstance(spec, str) else spec
    if spec.name == "hybrid":
        fm = sequential_evaluate(frame, "fm", seed, terms, feature_specs, False, exclude_summers)
        rf = sequential_evaluate(frame, "rf", seed, terms, feature_specs, False, exclude_summers)
        return hybrid_fm_rf(fm.runs, rf.runs, summers=summer_terms(frame), exclude_summers=exclude_summers)
    if frame["termnum"].nunique() < 2:
        raise ValueError("sequential evaluation needs at least two terms")
    data = _prepare(frame)
    specs = tuple(default_feature_specs(frame.columns) if feature_specs is None else feature_specs)
    all_terms = sorted(int(t) for t in data["termnum"].unique())
    wanted = [t for t in all_terms[1:] if terms is None or t in set(terms)]
    runs, skipped = [], []
    for t in wanted:
        train = data[(data["termnum"] < t) & data["grdpts"].notna()]
        test = data[data["termnum"] == t]
        if len(train) == 0:
            log.warning("term %d: no graded history, skipped", t)
            skipped.append(t)
            continue
        if len(test) == 0:
            continue
        raw, fallback, imp, used = predict_term(spec, train, test, term_seed(seed, t), specs, want_importance)
        pred = _dump_frame(test, raw, cold_start_classes(test, train))
        if spec.name in ("svd", "svdknn"):
            pred["fallback"] = fallback
        runs.append(TermRun(t, spec.name, spec.settings, pred, imp, len(train), used))
    report = segment_report(runs, summers=summer_terms(frame), exclude_summers=exclude_summers,
                            model=spec.name, params=spec.settings)
    report.skipped_terms = skipped
    return Evaluation(runs, report)


def _dump_frame(test: pd.DataFrame, raw: np.ndarray, cs) -> pd.DataFrame:
    return pd.DataFrame({
        "row": test["row"].to_numpy(),
        "sid": test["sid"].to_numpy(),
        "cid": test["cid"].to_numpy(),
        "termnum": test["termnum"].to_numpy().astype(int),
        "true": test["grdpts"].to_numpy(dtype=float),
        "raw": raw,
        "clipped": clip_prediction(raw),
        "cs_class": cs,
        "transfer": test["transfer"].fillna(False).astype(bool).to_numpy(),
        "cohort": test["cohort"].to_numpy().astype(int),
    })


def prediction_dump(runs) -> pd.DataFrame:
    if not runs:
        return pd.DataFrame(columns=DUMP_COLUMNS)
    return pd.concat([r.predictions for r in runs], ignore_index=True)


def write_dump(runs, path) -> None:
    """Write the per-dyad prediction dump as CSV (round-trip float formatting)."""
    prediction_dump(runs).to_csv(path, index=False, lineterminator="\n")


# ---------------------------------------------------------------- reports

def segment_report(runs, summers=(), exclude_summers: bool = False, model: str = "",
                   params: dict | None = None) -> EvaluationReport:
    """Metrics per segment plus the native-student cohort-by-term heatmap."""
    dump = prediction_dump(runs)
    graded = dump[dump["true"].notna()]
    masks = {
        "overall": np.ones(len(graded), dtype=bool),
        "CS": graded["cs_class"].to_numpy() != "NCS",
        "native": ~graded["transfer"].to_numpy(dtype=bool),
        "transfer": graded["transfer"].to_numpy(dtype=bool),
    }
    for c in ("NCS", "CSS", "CSC", "CSB"):
        masks[c] = graded["cs_class"].to_numpy() == c
    segments = {}
    for name in SEGMENTS:
        m = masks[name]
        segments[name] = compute_metrics(graded["true"].to_numpy()[m], graded["clipped"].to_numpy()[m]) if m.any() else None

    per_term = []
    for t, g in graded.groupby("termnum", sort=True):
        mt = compute_metrics(g["true"], g["clipped"])
        per_term.append({"termnum": int(t), **mt.as_dict()})
    per_term = pd.DataFrame(per_term, columns=["termnum", "rmse", "mae", "mae_std", "count"])

    native = graded[~graded["transfer"].to_numpy(dtype=bool)]
    if exclude_summers and summers:
        native = native[~native["termnum"].isin(set(summers))]
    cells = []
    for (co, t), g in native.groupby(["cohort", "termnum"], sort=True):
        mt = compute_metrics(g["true"], g["clipped"])
        cells.append({"cohort": int(co), "termnum": int(t), "rmse": mt.rmse, "count": mt.count})
    heatmap = pd.DataFrame(cells, columns=["cohort", "termnum", "rmse", "count"])
    return EvaluationReport(model, segments, per_term, heatmap, [], dict(params or {}))


def hybrid_fm_rf(fm_runs, rf_runs, summers=(), exclude_summers: bool = False) -> Evaluation:
    """Use the forest for new students (CSS, CSB) and the FM everywhere else."""
    fm = prediction_dump(fm_runs).set_index("row", drop=False)
    rf = prediction_dump(rf_runs).set_index("row", drop=False)
    only_fm = fm.index.difference(rf.index)
    only_rf = rf.index.difference(fm.index)
    if len(only_fm) or len(only_rf):
        missing = [tuple(x) for x in pd.concat([fm.loc[only_fm], rf.loc[only_rf]])[["sid", "cid", "termnum"]].to_numpy()]
        raise ValueError(f"FM and RF runs cover different dyads; unmatched: {missing[:20]}"
                         + (" ..." if len(missing) > 20 else ""))
    runs = []
    rf_by_term = {r.term: r for r in rf_runs}
    for fr in fm_runs:
        f = fr.predictions
        r = rf.loc[f["row"].to_numpy()]
        use_rf = np.isin(f["cs_class"].to_numpy(), ["CSS", "CSB"])
        merged = f.copy()
        merged["raw"] = np.where(use_rf, r["raw"].to_numpy(), f["raw"].to_numpy())
        merged["clipped"] = np.where(use_rf, r["clipped"].to_numpy(), f["clipped"].to_numpy())
        merged["source"] = np.where(use_rf, "rf", "fm")
        params = {"fm": fr.params, "rf": rf_by_term[fr.term].params}
        runs.append(TermRun(fr.term, "hybrid", params, merged.reset_index(drop=True), None, fr.n_train))
    params = {"fm": fm_runs[0].params, "rf": rf_runs[0].params} if fm_runs else {}
    report = segment_report(runs, summers, exclude_summers, "hybrid", params)
    return Evaluation(runs, report)


def importance_report(evaluation: Evaluation):
    """MADImp (fm, fm-ids-only, sgd, pmlr) or Gini (rf) report from a run with importance kept."""
    from .importance import gini_importance

    runs = [r for r in evaluation.runs if r.importance is not None]
    if not runs:
        raise ValueError("no importance data; rerun with want_importance=True on an additive model or rf")
    sizes = {r.term: len(r.predictions) for r in runs}
    if isinstance(runs[0].importance, RowShares):
        return madimp_aggregate({r.term: r.importance for r in runs}, sizes)
    return gini_importance({r.term: r.importance for r in runs}, sizes)
