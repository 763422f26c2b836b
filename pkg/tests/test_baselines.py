import numpy as np
import pandas as pd
import pytest

from gradepred.models.baselines import gm_fit, gm_predict, mom_fit, mom_predict, ur_predict

from conftest import tiny_frame


class TestUniform:
    def test_range_and_determinism(self):
        a = ur_predict(10_000, seed=4)
        assert a.min() >= 0.0 and a.max() <= 4.0
        assert np.array_equal(a, ur_predict(10_000, seed=4))
        assert abs(a.mean() - 2.0) < 0.05

    def test_expected_rmse_against_grade(self):
        # E[(U - g)^2] for U ~ U(0, 4) equals 16/3 - 4g + g^2
        g = 3.0
        draws = ur_predict(200_000, seed=0)
        assert np.sqrt(np.mean((draws - g) ** 2)) == pytest.approx(np.sqrt(16 / 3 - 4 * g + g * g), rel=0.01)


class TestMeans:
    def test_global_mean(self):
        f = tiny_frame()
        train = f[f.termnum < 2]
        assert gm_predict(gm_fit(train), train).tolist() == [train.grdpts.mean()] * len(train)

    def test_mean_of_means_by_hand(self):
        train = pd.DataFrame({"sid": ["a", "a", "b"], "cid": ["x", "y", "x"], "grdpts": [4.0, 2.0, 3.0]})
        m = mom_fit(train)
        test = pd.DataFrame({"sid": ["a", "b", "z", "z"], "cid": ["x", "q", "y", "q"]})
        gm = 3.0
        expected = [(gm + 3.0 + 3.5) / 3, (gm + 3.0) / 2, (gm + 2.0) / 2, gm]
        assert mom_predict(m, test) == pytest.approx(expected)

    def test_ungraded_rows_ignored(self):
        train = pd.DataFrame({"sid": ["a", "a"], "cid": ["x", "y"], "grdpts": [4.0, np.nan]})
        m = mom_fit(train)
        assert m.global_mean == 4.0 and "y" not in m.per_course_mean

    def test_empty_training(self):
        with pytest.raises(ValueError):
            gm_fit(pd.DataFrame({"sid": [], "cid": [], "grdpts": []}))
