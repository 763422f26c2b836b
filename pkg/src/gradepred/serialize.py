"""Versioned JSON dumps of fitted models.

Floats are written with Python's shortest round-trip representation, so a
dump followed by a load reproduces every parameter bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .models.baselines import MeansModel
from .models.fm import FMModel
from .models.forest import ForestModel, Tree
from .models.knn import NeighborModel
from .models.linear import LinearModel
from .models.pmlr import PMLRModel
from .models.svd import SVDModel

FORMAT = "gradepred-model"
VERSION = 1


def _arr(a):
    return None if a is None else np.asarray(a).tolist()


def _np(v, dtype=float):
    return None if v is None else np.asarray(v, dtype=dtype)


def model_to_dict(model) -> dict:
    if isinstance(model, FMModel):
        body = {"w0": model.w0, "w": _arr(model.w), "V": _arr(model.V), "n_draws": model.n_draws,
                "noise_precision": model.noise_precision, "pred_mean": _arr(model.pred_mean)}
    elif isinstance(model, SVDModel):
        body = {"students": list(model.student_index), "courses": list(model.course_index),
                "student_factors": _arr(model.student_factors), "course_factors": _arr(model.course_factors)}
    elif isinstance(model, LinearModel):
        body = {"coef": _arr(model.coef), "intercept": model.intercept}
    elif isinstance(model, PMLRModel):
        body = {"w0": model.w0, "student_bias": _arr(model.student_bias), "course_bias": _arr(model.course_bias),
                "P": _arr(model.P), "W": _arr(model.W), "students": list(model.student_index),
                "courses": list(model.course_index), "epoch_min": _arr(model.epoch_min)}
    elif isinstance(model, ForestModel):
        body = {"n_features": model.n_features, "max_depth": model.max_depth, "max_features": model.max_features,
                "trees": [{"feature": _arr(t.feature), "threshold": [None if np.isnan(v) else v for v in t.threshold.tolist()],
                           "left": _arr(t.left), "right": _arr(t.right), "value": _arr(t.value),
                           "gain": _arr(t.gain), "seed": t.seed} for t in model.trees]}
    elif isinstance(model, NeighborModel):
        body = {"X": _arr(model.X), "y": _arr(model.y), "k": model.k}
    elif isinstance(model, MeansModel):
        body = {"global_mean": model.global_mean, "per_student_mean": model.per_student_mean,
                "per_course_mean": model.per_course_mean}
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return {"format": FORMAT, "version": VERSION, "kind": type(model).__name__, "model": body}


def model_from_dict(d: dict):
    if d.get("format") != FORMAT:
        raise ValueError("not a gradepred model dump")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported model dump version {d.get('version')!r}")
    kind, b = d["kind"], d["model"]
    if kind == "FMModel":
        return FMModel(b["w0"], _np(b["w"]), _np(b["V"]).reshape(len(b["w"]), -1), b["n_draws"],
                       b["noise_precision"], _np(b["pred_mean"]))
    if kind == "SVDModel":
        k = len(b["student_factors"][0]) if b["student_factors"] else 0
        return SVDModel({s: i for i, s in enumerate(b["students"])}, {c: j for j, c in enumerate(b["courses"])},
                        _np(b["student_factors"]).reshape(-1, k), _np(b["course_factors"]).reshape(-1, k))
    if kind == "LinearModel":
        return LinearModel(_np(b["coef"]), b["intercept"])
    if kind == "PMLRModel":
        k = len(b["W"])
        return PMLRModel(b["w0"], _np(b["student_bias"]), _np(b["course_bias"]),
                         _np(b["P"]).reshape(-1, k), _np(b["W"]).reshape(k, -1),
                         {s: i for i, s in enumerate(b["students"])}, {c: j for j, c in enumerate(b["courses"])},
                         _np(b["epoch_min"]))
    if kind == "ForestModel":
        trees = tuple(
            Tree(_np(t["feature"], np.int64), np.array([np.nan if v is None else v for v in t["threshold"]], dtype=float),
                 _np(t["left"], np.int64), _np(t["right"], np.int64), _np(t["value"]), _np(t["gain"]), t["seed"])
            for t in b["trees"]
        )
        return ForestModel(trees, b["n_features"], b["max_depth"], b["max_features"])
    if kind == "NeighborModel":
        return NeighborModel(_np(b["X"]).reshape(len(b["y"]), -1), _np(b["y"]), b["k"])
    if kind == "MeansModel":
        return MeansModel(b["global_mean"], b["per_student_mean"], b["per_course_mean"])
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True))


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
