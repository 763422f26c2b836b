import json

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gradepred.evaluation import (
    DUMP_COLUMNS,
    ModelSpec,
    clip_prediction,
    compute_metrics,
    hybrid_fm_rf,
    importance_report,
    sequential_evaluate,
    term_seed,
)

FAST = {
    "svd": {"epochs": 5},
    "svdknn": {"epochs": 5},
    "fm": {"iterations": 10, "k": 2},
    "fm-ids-only": {"iterations": 10, "k": 2},
    "knn": {"k": 5},
    "sgd": {"iterations": 2},
    "rf": {"n_trees": 5, "max_depth": 4},
    "pmlr": {"epochs": 5},
}


def fast(name):
    return ModelSpec(name, FAST.get(name, {}))


class TestMetrics:
    def test_by_hand(self):
        m = compute_metrics([1.0, 2.0, 4.0], [2.0, 2.0, 2.0])
        assert m.rmse == pytest.approx(np.sqrt(5 / 3))
        assert m.mae == pytest.approx(1.0)
        assert m.mae_std == pytest.approx(np.std([1.0, 0.0, 2.0]))
        assert m.count == 3

    def test_empty(self):
        with pytest.raises(ValueError):
            compute_metrics([], [])

    def test_clip(self):
        assert clip_prediction([-1.0, 2.5, 7.0]).tolist() == [0.0, 2.5, 4.0]
        assert clip_prediction(4.2) == 4.0
        with pytest.raises(FloatingPointError):
            clip_prediction([np.nan])

    def test_term_seed_stable(self):
        assert term_seed(0, 3) == term_seed(0, 3)
        assert term_seed(0, 3) != term_seed(0, 4)
        assert 0 <= term_seed(123, 9) < 2**31


class TestSpec:
    def test_unknown_model(self):
        with pytest.raises(ValueError, match="unknown model"):
            ModelSpec("xgb")

    def test_unknown_param(self):
        with pytest.raises(ValueError, match="hyperparameter"):
            ModelSpec("fm", {"depth": 3})


class TestLoop:
    def test_term_zero_never_predicted(self, small_data):
        ev = sequential_evaluate(small_data.frame, "gm")
        assert 0 not in set(ev.dump.termnum)
        assert sorted(set(ev.dump.termnum)) == list(range(1, 5))
        assert list(ev.dump.columns) == DUMP_COLUMNS
        assert len(ev.dump) == (small_data.frame.termnum > 0).sum()

    def test_gm_is_mean_of_earlier_terms(self, small_data):
        f = small_data.frame
        ev = sequential_evaluate(f, "gm")
        for t in range(1, 5):
            got = ev.dump.loc[ev.dump.termnum == t, "raw"].unique()
            assert got == pytest.approx([f.loc[f.termnum < t, "grdpts"].mean()])

    def test_term_without_graded_history_skipped(self):
        f = pd.DataFrame({"sid": ["a", "b", "a"], "cid": ["x", "x", "y"], "termnum": [0, 1, 2],
                          "grdpts": [np.nan, 3.0, 2.0]})
        ev = sequential_evaluate(f, "gm")
        assert ev.report.skipped_terms == [1]
        assert ev.dump.termnum.tolist() == [2]

    def test_single_term_rejected(self):
        with pytest.raises(ValueError):
            sequential_evaluate(pd.DataFrame({"sid": ["a"], "cid": ["x"], "termnum": [0], "grdpts": [3.0]}), "gm")

    @pytest.mark.parametrize("name", ["ur", "gm", "mom", "svd", "svdknn", "fm", "fm-ids-only", "knn", "sgd", "rf", "pmlr"])
    def test_future_terms_do_not_leak(self, small_data, name):
        f = small_data.frame
        mutated = f.copy()
        late = mutated.termnum >= 3
        mutated.loc[late, "grdpts"] = 4.0 - mutated.loc[late, "grdpts"]
        a = sequential_evaluate(f, fast(name), seed=1, terms=[1, 2]).dump
        b = sequential_evaluate(mutated, fast(name), seed=1, terms=[1, 2]).dump
        assert np.array_equal(a.raw.to_numpy(), b.raw.to_numpy())

    def test_partial_rerun_matches_full(self, small_data):
        full = sequential_evaluate(small_data.frame, fast("sgd"), seed=2).dump
        part = sequential_evaluate(small_data.frame, fast("sgd"), seed=2, terms=[3]).dump
        assert np.array_equal(full.loc[full.termnum == 3, "raw"].to_numpy(), part.raw.to_numpy())

    def test_svd_fallback_flagged(self, small_data):
        d = sequential_evaluate(small_data.frame, fast("svd")).dump
        assert d.fallback.any()
        assert (d.loc[d.fallback, "cs_class"] != "NCS").all()


class TestReport:
    def test_segments_consistent(self, small_data):
        rep = sequential_evaluate(small_data.frame, "mom").report
        seg = rep.segments
        assert seg["overall"].count == seg["NCS"].count + seg["CS"].count
        assert seg["CS"].count == sum(seg[c].count for c in ("CSS", "CSC", "CSB") if seg[c] is not None)
        assert seg["overall"].count == seg["native"].count + seg["transfer"].count
        assert rep.count_matrix().to_numpy().sum() == seg["native"].count
        json.loads(rep.to_json())

    def test_heatmap_cells_by_hand(self, small_data):
        ev = sequential_evaluate(small_data.frame, "gm")
        d = ev.dump[~ev.dump.transfer]
        g = d[(d.cohort == d.cohort.min()) & (d.termnum == 2)]
        cell = ev.report.heatmap.query("cohort == @g.cohort.iloc[0] and termnum == 2").iloc[0]
        assert cell.rmse == pytest.approx(np.sqrt(np.mean((g.clipped - g["true"]) ** 2)))

    def test_summer_exclusion(self, small_data):
        f = small_data.frame
        summers = set(f.loc[f.season == "Summer", "termnum"])
        if not summers:
            pytest.skip("no summer term in fixture")
        rep = sequential_evaluate(f, "gm", exclude_summers=True).report
        assert not set(rep.heatmap.termnum) & summers


class TestHybrid:
    def test_routes_by_cold_start_class(self, small_data):
        fm = sequential_evaluate(small_data.frame, fast("fm"))
        rf = sequential_evaluate(small_data.frame, fast("rf"))
        hy = hybrid_fm_rf(fm.runs, rf.runs).dump
        new = hy.cs_class.isin(["CSS", "CSB"]).to_numpy()
        assert np.array_equal(hy.raw.to_numpy()[new], rf.dump.raw.to_numpy()[new])
        assert np.array_equal(hy.raw.to_numpy()[~new], fm.dump.raw.to_numpy()[~new])
        assert (hy.source == np.where(new, "rf", "fm")).all()

    def test_mismatched_coverage(self, small_data):
        fm = sequential_evaluate(small_data.frame, "gm", terms=[1, 2])
        rf = sequential_evaluate(small_data.frame, "gm", terms=[1])
        with pytest.raises(ValueError, match="unmatched"):
            hybrid_fm_rf(fm.runs, rf.runs)


class TestImportanceFromRuns:
    @pytest.mark.parametrize("name,method", [("fm", "madimp"), ("sgd", "madimp"), ("pmlr", "madimp"), ("rf", "gini")])
    def test_shares_sum_to_one(self, small_data, name, method):
        ev = sequential_evaluate(small_data.frame, fast(name), terms=[2, 3], want_importance=True)
        rep = importance_report(ev)
        assert rep.method == method
        assert rep.shares.sum() == pytest.approx(1.0)

    def test_no_importance_kept(self, small_data):
        with pytest.raises(ValueError):
            importance_report(sequential_evaluate(small_data.frame, "gm", terms=[1]))

    def test_selection_runs(self, small_data):
        spec = ModelSpec("fm", FAST["fm"], select_threshold=0.01)
        d = sequential_evaluate(small_data.frame, spec, terms=[2]).dump
        assert np.isfinite(d.raw).all()


class TestProperties:
    @given(raw=st.floats(-50, 50), true=st.sampled_from([0.0, 0.67, 1.33, 2.0, 2.67, 3.33, 4.0]))
    def test_clipping_never_increases_error(self, raw, true):
        assert abs(clip_prediction(raw) - true) <= abs(raw - true)

    def test_hybrid_report_recomputes_from_dump(self, small_data):
        fm = sequential_evaluate(small_data.frame, fast("fm"))
        rf = sequential_evaluate(small_data.frame, fast("rf"))
        hy = hybrid_fm_rf(fm.runs, rf.runs)
        d = hy.dump
        assert hy.report.metric("overall") == pytest.approx(compute_metrics(d["true"], d.clipped).rmse, abs=1e-15)
        css = d[d.cs_class == "CSS"]
        assert hy.report.metric("CSS") == pytest.approx(compute_metrics(css["true"], css.clipped).rmse, abs=1e-15)

    def test_segment_partition(self, small_data):
        seg = sequential_evaluate(small_data.frame, "gm").report.segments
        assert seg["overall"].count == sum(seg[c].count for c in ("NCS", "CSS", "CSC", "CSB") if seg[c] is not None)
