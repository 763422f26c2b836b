"""
Where does an FM prediction come from?
======================================

MADImp splits each prediction's distance from the intercept among the
features that produced it.  Start with one hand-sized row, then aggregate
over a fitted model and use the shares to pick features.
"""

import numpy as np

from gradepred import ModelSpec, SynthConfig, generate_synthetic, importance_report, sequential_evaluate
from gradepred.importance import fm_decompose, madimp_row
from gradepred.models.fm import FMModel

# a 35-column model with three active one-hot columns
w = np.zeros(35)
w[1], w[11] = 0.5, 2.0
V = np.zeros((35, 2))
V[1], V[11], V[32] = (-0.2, 0.2), (0.2, 0.2), (1.0, 0.0)
dec = fm_decompose(FMModel(0.5, w, V), {1: 1.0, 11: 1.0, 32: 1.0})
print("prediction", dec.prediction)
print("1-way", dec.one_way)
print("2-way", dec.two_way)
# the two pairwise terms cancel in the prediction but both count towards importance
print({k: round(v, 4) for k, v in madimp_row(dec).items()})

# aggregate shares over a fitted FM, term by term
frame = generate_synthetic(SynthConfig(seed=3, n_students=800, n_courses=100, n_terms=5)).frame
ev = sequential_evaluate(frame, ModelSpec("fm", {"iterations": 100}), seed=0, terms=[3, 4], want_importance=True)
report = importance_report(ev)
print(report.to_frame().head(12).round(4).to_string(index=False))
print(report.per_term.pivot(index="feature", columns="termnum", values="share").round(3).head(10))

# refit with only the features above the threshold; sid and cid always stay
selected = sequential_evaluate(frame, ModelSpec("fm", {"iterations": 100}, select_threshold=0.02), seed=0, terms=[3, 4])
for run in selected.runs:
    print(run.term, len(run.features), "features kept")
print("all features", round(ev.report.metric(), 4), "selected", round(selected.report.metric(), 4))

# the forest reports Gini importance instead
rf = sequential_evaluate(frame, ModelSpec("rf", {"n_trees": 30}), seed=0, terms=[4], want_importance=True)
print(importance_report(rf).shares.head(8).round(4))
