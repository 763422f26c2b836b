"""
Synthetic transcripts and cold-start dyads
==========================================

Generate a transcript with planted student, course and instructor effects,
then look at how many of each term's dyads involve a student or a course
the model has never seen.
"""

import numpy as np

from gradepred import SynthConfig, generate_synthetic
from gradepred.transcript import cold_start_summary, with_derived

# a smaller cousin of the default dataset: 1200 students over 8 terms
data = generate_synthetic(SynthConfig(seed=1, n_students=1200, n_courses=150, n_terms=8))
frame = data.frame
print(f"{len(frame)} dyads, {frame.sid.nunique()} students, {frame.cid.nunique()} courses")
print(frame.head())

# the generator keeps its planted truth next to the data
print("global mean", data.truth["global_mean"])
print("noiseless grade of the first dyad", round(float(data.expected[0]), 3))

# per-term counts of NCS / CSS / CSC / CSB dyads
summary = cold_start_summary(frame)
print(summary.to_string(index=False))

# transfer students arrive with credits from another institution, so every
# one of their first-term dyads is cold on arrival
first = frame[frame.transfer].groupby("sid").termnum.transform("min")
print("transfer rows in arrival term:", int((frame[frame.transfer].termnum == first).sum()))

# derived features only look at grades from earlier terms
derived = with_derived(frame)
cols = ["sid", "termnum", "lterm_gpa", "lterm_cum_gpa", "total_chrs", "sterm", "alevel"]
one = derived[derived.sid == derived.sid.iloc[0]].sort_values("termnum")[cols]
print(one.drop_duplicates("termnum").to_string(index=False))
print("first-term rows without history:", int(np.isnan(derived.loc[derived.sterm == 0, "lterm_gpa"]).sum()))
