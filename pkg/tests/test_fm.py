import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from gradepred.importance import fm_decompose, madimp_row
from gradepred.models.fm import FMModel, fm_fit, fm_predict


def naive_fm(model, x):
    """Direct double sum over feature pairs."""
    out = model.w0 + float(model.w @ x)
    for a in range(len(x)):
        for b in range(a + 1, len(x)):
            out += x[a] * x[b] * float(model.V[a] @ model.V[b])
    return out


def random_model(rng, p, k):
    return FMModel(float(rng.normal()), rng.normal(size=p), rng.normal(0, 0.5, size=(p, k)))


class TestEvaluation:
    @given(seed=st.integers(0, 10_000), p=st.integers(1, 12), k=st.integers(1, 5))
    @settings(max_examples=40, deadline=None)
    def test_matches_naive_double_loop(self, seed, p, k):
        rng = np.random.default_rng(seed)
        model = random_model(rng, p, k)
        X = rng.normal(size=(6, p)) * (rng.random((6, p)) < 0.5)
        fast = fm_predict(model, sp.csr_matrix(X))
        slow = [naive_fm(model, row) for row in X]
        assert fast == pytest.approx(slow, abs=1e-9)

    def test_width_mismatch(self):
        model = random_model(np.random.default_rng(0), 4, 2)
        with pytest.raises(ValueError):
            fm_predict(model, sp.csr_matrix((1, 5)))

    def test_hand_worked_three_feature_row(self):
        p = 35
        w = np.zeros(p)
        w[1], w[11] = 0.5, 2.0
        V = np.zeros((p, 2))
        V[1], V[11], V[32] = (-0.2, 0.2), (0.2, 0.2), (1.0, 0.0)
        model = FMModel(0.5, w, V)
        x = np.zeros(p)
        x[[1, 11, 32]] = 1.0
        assert fm_predict(model, sp.csr_matrix(x)) == pytest.approx([3.0])
        dec = fm_decompose(model, {1: 1.0, 11: 1.0, 32: 1.0})
        assert dec.prediction == pytest.approx(3.0)
        assert dec.two_way == pytest.approx({(1, 11): 0.0, (1, 32): -0.2, (11, 32): 0.2})
        shares = madimp_row(dec)
        assert shares[1] == pytest.approx(0.6 / 2.9)
        assert shares[11] == pytest.approx(2.1 / 2.9)
        assert shares[32] == pytest.approx(0.2 / 2.9)
        assert round(shares[1], 4) == 0.2069 and round(shares[11], 4) == 0.7241 and round(shares[32], 4) == 0.0690


def _planted(seed=0, n=3000, p=40, k=2):
    rng = np.random.default_rng(seed)
    truth = FMModel(2.5, rng.normal(0, 0.4, p), rng.normal(0, 0.3, (p, k)))
    rows = np.repeat(np.arange(n), 3)
    cols = np.concatenate([rng.choice(p, 3, replace=False) for _ in range(n)])
    X = sp.csr_matrix((np.ones(3 * n), (rows, cols)), shape=(n, p))
    y = fm_predict(truth, X)
    return truth, X, y, rng


class TestGibbs:
    def test_recovers_noisy_planted_model(self):
        truth, X, y, rng = _planted()
        y_obs = y + rng.normal(0, 0.1, len(y))
        model = fm_fit(X[:2500], y_obs[:2500], k=2, iterations=300, seed=1, X_pred=X[2500:])
        rmse = np.sqrt(np.mean((model.pred_mean - y[2500:]) ** 2))
        assert rmse < 0.1
        assert model.noise_precision == pytest.approx(100, rel=0.3)

    def test_seed_determinism(self):
        _, X, y, _ = _planted(n=300)
        a = fm_fit(X, y, k=2, iterations=20, seed=3, X_pred=X)
        b = fm_fit(X, y, k=2, iterations=20, seed=3, X_pred=X)
        assert np.array_equal(a.pred_mean, b.pred_mean) and np.array_equal(a.V, b.V)
        c = fm_fit(X, y, k=2, iterations=20, seed=4, X_pred=X)
        assert not np.array_equal(a.V, c.V)

    def test_burn_in_half(self):
        _, X, y, _ = _planted(n=100)
        assert fm_fit(X, y, k=2, iterations=21, seed=0).n_draws == 11

    def test_constant_target_intercept(self):
        X = sp.csr_matrix(np.eye(10)[np.arange(200) % 10])
        model = fm_fit(X, np.full(200, 3.0), k=2, iterations=100, seed=0, X_pred=X)
        assert model.pred_mean == pytest.approx(np.full(200, 3.0), abs=0.05)

    @pytest.mark.parametrize("kw", [{"k": 0}, {"iterations": 0}])
    def test_invalid_settings(self, kw):
        with pytest.raises(ValueError):
            fm_fit(sp.csr_matrix(np.eye(2)), [1.0, 2.0], **kw)

    def test_pred_width_checked(self):
        with pytest.raises(ValueError):
            fm_fit(sp.csr_matrix(np.eye(2)), [1.0, 2.0], X_pred=sp.csr_matrix((1, 3)))
