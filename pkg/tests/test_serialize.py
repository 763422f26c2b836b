import numpy as np
import pandas as pd
import pytest
import scipy.sparse as sp

from gradepred.models.baselines import mom_fit
from gradepred.models.fm import fm_fit, fm_predict
from gradepred.models.forest import rf_fit, rf_predict
from gradepred.models.knn import knn_fit, knn_predict
from gradepred.models.linear import linear_predict, sgd_fit
from gradepred.models.pmlr import pmlr_fit, pmlr_predict
from gradepred.models.svd import svd_fit, svd_predict_many
from gradepred.serialize import load_model, model_from_dict, model_to_dict, save_model

rng = np.random.default_rng(0)
X = rng.normal(size=(60, 4))
y = rng.uniform(0, 4, 60)
sids = [f"s{i % 9}" for i in range(60)]
cids = [f"c{i % 7}" for i in range(60)]


@pytest.mark.parametrize("fit,predict", [
    (lambda: fm_fit(sp.csr_matrix(X), y, k=2, iterations=10), lambda m: fm_predict(m, sp.csr_matrix(X))),
    (lambda: rf_fit(X, y, n_trees=3, max_depth=3), lambda m: rf_predict(m, X)),
    (lambda: knn_fit(X, y, k=3), lambda m: knn_predict(m, X)),
    (lambda: sgd_fit(X, y), lambda m: linear_predict(m, X)),
    (lambda: pmlr_fit(sids, cids, X, y, epochs=3), lambda m: pmlr_predict(m, sids, cids, X)),
    (lambda: svd_fit(sids, cids, y, epochs=3), lambda m: svd_predict_many(m, sids, cids)),
])
def test_round_trip_predictions_identical(tmp_path, fit, predict):
    model = fit()
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert np.array_equal(predict(model), predict(back))


def test_means_model():
    m = mom_fit(pd.DataFrame({"sid": ["a"], "cid": ["x"], "grdpts": [3.0]}))
    assert model_from_dict(model_to_dict(m)) == m


def test_version_checked():
    d = model_to_dict(knn_fit(X, y, k=1))
    d["version"] = 99
    with pytest.raises(ValueError, match="version"):
        model_from_dict(d)
    with pytest.raises(ValueError):
        model_from_dict({"format": "other"})
    with pytest.raises(TypeError):
        model_to_dict(object())
