import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradepred.models.forest import rf_fit, rf_predict, split_gains
from gradepred.models.knn import knn_fit, knn_neighbors, knn_predict
from gradepred.models.linear import linear_predict, sgd_fit
from gradepred.models.pmlr import pmlr_components, pmlr_fit, pmlr_predict


class TestKNN:
    @given(seed=st.integers(0, 5000), k=st.integers(1, 6))
    @settings(max_examples=30, deadline=None)
    def test_matches_brute_force(self, seed, k):
        rng = np.random.default_rng(seed)
        # coarse grid values force distance ties
        X = rng.integers(0, 3, (40, 3)).astype(float)
        y = rng.normal(size=40)
        Q = rng.integers(0, 3, (7, 3)).astype(float)
        model = knn_fit(X, y, k=k)
        for q, got in zip(Q, knn_neighbors(model, Q)):
            d = ((X - q) ** 2).sum(axis=1)
            want = np.lexsort((np.arange(40), d))[:k]
            assert got.tolist() == want.tolist()
        assert knn_predict(model, Q) == pytest.approx([y[np.lexsort((np.arange(40), ((X - q) ** 2).sum(1)))[:k]].mean() for q in Q])

    def test_bad_k(self):
        with pytest.raises(ValueError):
            knn_fit(np.zeros((3, 1)), np.zeros(3), k=4)


class TestSGD:
    def test_recovers_linear_signal(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(4000, 5))
        y = 2.0 + X @ np.array([0.5, -0.3, 0.0, 0.0, 0.8])
        m = sgd_fit(X, y, lr=0.005, l1=0.0001, iterations=20)
        assert m.coef == pytest.approx([0.5, -0.3, 0.0, 0.0, 0.8], abs=0.02)
        assert m.intercept == pytest.approx(2.0, abs=0.02)
        assert linear_predict(m, X[:3]) == pytest.approx(y[:3], abs=0.05)

    def test_l1_zeroes_irrelevant_features(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(2000, 3))
        y = X[:, 0] + rng.normal(0, 0.1, 2000)
        m = sgd_fit(X, y, lr=0.01, l1=0.5, iterations=5)
        assert m.coef[1] == 0.0 and m.coef[2] == 0.0

    def test_divergence_reported(self):
        X = np.full((50, 2), 100.0)
        with pytest.raises(FloatingPointError):
            sgd_fit(X, np.ones(50), lr=10.0)


class TestForest:
    def test_depth_zero_predicts_bootstrap_free_mean(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(100, 2))
        y = rng.normal(size=100)
        m = rf_fit(X, y, n_trees=5, max_depth=0)
        assert rf_predict(m, X[:4]) == pytest.approx(np.full(4, y.mean()))
        assert split_gains(m).sum() == 0.0

    def test_step_function(self):
        X = np.arange(200, dtype=float)[:, None]
        y = np.where(X[:, 0] < 100, 1.0, 3.0)
        m = rf_fit(X, y, n_trees=10, max_depth=1, seed=0)
        assert rf_predict(m, np.array([[10.0], [150.0]])) == pytest.approx([1.0, 3.0], abs=0.05)
        assert all(t.depth <= 1 for t in m.trees)

    def test_gains_credit_signal_feature(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(500, 3))
        y = 2 * X[:, 1] + rng.normal(0, 0.1, 500)
        g = split_gains(rf_fit(X, y, n_trees=20, max_depth=4, max_features=3))
        assert g.argmax() == 1 and g[1] / g.sum() > 0.9

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        X, y = rng.normal(size=(80, 4)), rng.normal(size=80)
        assert np.array_equal(rf_predict(rf_fit(X, y, n_trees=7, seed=5), X), rf_predict(rf_fit(X, y, n_trees=7, seed=5), X))


class TestPMLR:
    def _data(self, seed=0, n_s=80, n_c=20, n=3000):
        rng = np.random.default_rng(seed)
        sb = rng.uniform(0, 0.8, n_s)
        cb = rng.uniform(0, 0.8, n_c)
        si = rng.integers(0, n_s, n)
        ci = rng.integers(0, n_c, n)
        X = rng.uniform(0, 1, (n, 2))
        y = 1.0 + sb[si] + cb[ci] + 0.5 * X[:, 0]
        return [f"s{i}" for i in si], [f"c{j}" for j in ci], X, y

    def test_parameters_stay_nonnegative(self):
        s, c, X, y = self._data()
        m = pmlr_fit(s, c, X, -y, epochs=20)
        assert m.epoch_min.min() >= 0.0
        for arr in (m.student_bias, m.course_bias, m.P, m.W):
            assert (arr >= 0).all()
        assert m.w0 >= 0.0

    def test_fits_nonnegative_planted_structure(self):
        s, c, X, y = self._data()
        m = pmlr_fit(s, c, X, y, k=2, lam_b=0.01, lam_w=0.001, lr=0.01, epochs=100)
        rmse = np.sqrt(np.mean((pmlr_predict(m, s, c, X) - y) ** 2))
        assert rmse < 0.15

    def test_components_sum_to_prediction(self):
        s, c, X, y = self._data(n=200)
        m = pmlr_fit(s, c, X, y, epochs=5)
        w0, sb, cb, contrib = pmlr_components(m, s + ["new"], c + ["new"], np.vstack([X, X[:1]]))
        assert sb[-1] == 0.0 and cb[-1] == 0.0
        assert w0 + sb + cb + contrib.sum(1) == pytest.approx(pmlr_predict(m, s + ["new"], c + ["new"], np.vstack([X, X[:1]])))
