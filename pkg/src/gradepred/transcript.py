"""Transcript data model, per-term derived features and cold-start taxonomy.

A transcript is held as a :class:`pandas.DataFrame` with one row per
(student, course, term) dyad.  Column names follow the usual registrar
feature names (``sid``, ``cid``, ``iid``, ``termnum``, ``grdpts``, ...).
:class:`TranscriptRecord` is the single-row view of the same schema.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, fields
from typing import Iterable

import numpy as np
import pandas as pd

STUDENT_COLUMNS = ["major", "race", "sex", "age", "zip", "sat", "hs", "hsgpa", "cohort", "transfer"]
COURSE_COLUMNS = ["cdisc", "chrs", "clevel"]
INSTRUCTOR_COLUMNS = ["iclass", "irank", "itenure"]
ID_COLUMNS = ["sid", "cid", "iid"]
REQUIRED_COLUMNS = ["sid", "cid", "termnum"]

DERIVED_COLUMNS = [
    "lterm_gpa",
    "lterm_cum_gpa",
    "prior_gpa",
    "lterm_cgpa",
    "lterm_cum_cgpa",
    "term_chrs",
    "total_chrs",
    "num_enrolled",
    "total_enrolled",
    "alevel",
    "sterm",
]


class ColdStartClass(str, enum.Enum):
    NCS = "NCS"  # student and course both seen
    CSS = "CSS"  # new student only
    CSC = "CSC"  # new course only
    CSB = "CSB"  # both new

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class TranscriptRecord:
    sid: str
    cid: str
    termnum: int
    grdpts: float | None = None
    iid: str | None = None
    institution_id: str | None = None
    major: str | None = None
    race: str | None = None
    sex: str | None = None
    age: float | None = None
    zip: str | None = None
    sat: float | None = None
    hs: str | None = None
    hsgpa: float | None = None
    cohort: int | None = None
    transfer: bool = False
    cdisc: str | None = None
    chrs: float | None = None
    clevel: int | None = None
    iclass: str | None = None
    irank: str | None = None
    itenure: str | None = None

    def __post_init__(self):
        if self.sid is None or self.cid is None or self.termnum is None:
            raise ValueError("sid, cid and termnum are required")
        if self.grdpts is not None and not 0.0 <= self.grdpts <= 4.0:
            raise ValueError(f"grade {self.grdpts} outside [0, 4]")


RECORD_COLUMNS = [f.name for f in fields(TranscriptRecord)]


def records_to_frame(records: Iterable[TranscriptRecord]) -> pd.DataFrame:
    frame = pd.DataFrame([asdict(r) for r in records], columns=RECORD_COLUMNS)
    return normalize_frame(frame)


def frame_to_records(frame: pd.DataFrame) -> list[TranscriptRecord]:
    cols = [c for c in RECORD_COLUMNS if c in frame.columns]
    out = []
    for row in frame[cols].itertuples(index=False):
        values = {c: (None if _missing(v) else v) for c, v in zip(cols, row)}
        values["termnum"] = int(values["termnum"])
        values["transfer"] = bool(values.get("transfer") or False)
        out.append(TranscriptRecord(**values))
    return out


def _missing(v) -> bool:
    return v is None or (isinstance(v, float) and np.isnan(v)) or v is pd.NA


def normalize_frame(frame: pd.DataFrame) -> pd.DataFrame:
    """Coerce identifier and numeric columns to canonical dtypes."""
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"transcript missing required column(s): {', '.join(missing)}")
    df = frame.copy()
    for c in ("sid", "cid"):
        df[c] = df[c].astype(str)
    df["termnum"] = df["termnum"].astype(np.int64)
    if "grdpts" not in df.columns:
        df["grdpts"] = np.nan
    df["grdpts"] = df["grdpts"].astype(float)
    if "transfer" not in df.columns:
        df["transfer"] = False
    df["transfer"] = df["transfer"].fillna(False).astype(bool)
    if "iid" not in df.columns:
        df["iid"] = None
    if "institution_id" in df.columns:
        # transfer credit rows name the sending institution in place of an instructor
        sub = df["iid"].isna() & df["institution_id"].notna()
        df.loc[sub, "iid"] = "inst:" + df.loc[sub, "institution_id"].astype(str)
    df["iid"] = df["iid"].where(df["iid"].notna(), None)
    for c in ("age", "sat", "hsgpa", "chrs"):
        if c in df.columns:
            df[c] = pd.to_numeric(df[c], errors="coerce")
    return df.reset_index(drop=True)


def _alevel(total_chrs: np.ndarray) -> np.ndarray:
    tc = np.asarray(total_chrs, dtype=float)
    lvl = np.digitize(tc, [30.0, 60.0, 90.0])
    return np.where(tc > 120.0, 4, lvl).astype(np.int64)


def _gpa_table(df: pd.DataFrame, key: str, weighted: bool) -> pd.DataFrame:
    """Per (key, termnum) grade sums, sorted chronologically within key."""
    g = df["grdpts"]
    has = g.notna()
    h = df["chrs"].fillna(0.0) if "chrs" in df.columns else pd.Series(0.0, index=df.index)
    hrs_missing = (df["chrs"].isna() if "chrs" in df.columns else pd.Series(True, index=df.index)) & has
    work = pd.DataFrame(
        {
            key: df[key],
            "termnum": df["termnum"],
            "gh": (g * h).where(has, 0.0),
            "h": h.where(has, 0.0),
            "gs": g.where(has, 0.0),
            "n": has.astype(float),
            "miss": hrs_missing.astype(float),
            "att": h,
            "rows": 1.0,
        }
    )
    t = work.groupby([key, "termnum"], sort=True).sum().reset_index()
    if not weighted:
        t["miss"] = 1.0
    return t


def _gpa(gh, h, gs, n, miss):
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(h > 0, gh / np.where(h > 0, h, 1.0), np.nan)
        u = np.where(n > 0, gs / np.where(n > 0, n, 1.0), np.nan)
    return np.where((miss > 0) | ~(h > 0), u, w)


def derive_features(frame: pd.DataFrame, as_of: int | None = None) -> pd.DataFrame:
    """Per-row derived features using only grades from strictly earlier terms.

    Each row is featurized relative to its own term.  Grade-based aggregates
    (``lterm_*``) look only at terms before the row's term; enrollment counts
    (``term_chrs``, ``num_enrolled``, ``total_enrolled``) use registrations up
    to and including the row's term, never grades from it.  With ``as_of`` set,
    only the rows of that term are returned.
    """
    df = frame
    st = _gpa_table(df, "sid", weighted=True)
    grp = st.groupby("sid", sort=False)
    st["term_gpa"] = _gpa(st.gh, st.h, st.gs, st.n, st.miss)
    st["lterm_gpa"] = grp["term_gpa"].shift(1)
    cum = grp[["gh", "h", "gs", "n", "miss", "att"]].cumsum() - st[["gh", "h", "gs", "n", "miss", "att"]]
    st["lterm_cum_gpa"] = _gpa(cum.gh, cum.h, cum.gs, cum.n, cum.miss)
    st["total_chrs"] = cum["att"]
    st["term_chrs"] = st["att"]
    st["sterm"] = grp.cumcount()
    st["first_term"] = grp["termnum"].transform("min")

    ct = _gpa_table(df, "cid", weighted=False)
    cgrp = ct.groupby("cid", sort=False)
    ct["term_cgpa"] = _gpa(ct.gh, ct.h, ct.gs, ct.n, ct.miss)
    ct["lterm_cgpa"] = cgrp["term_cgpa"].shift(1)
    ccum = cgrp[["gs", "n"]].cumsum() - ct[["gs", "n"]]
    ct["lterm_cum_cgpa"] = _gpa(np.zeros(len(ct)), np.zeros(len(ct)), ccum.gs, ccum.n, np.ones(len(ct)))
    ct["num_enrolled"] = ct["rows"]
    ct["total_enrolled"] = cgrp["rows"].cumsum()

    keys = df[["sid", "cid", "termnum"]]
    s_cols = ["lterm_gpa", "lterm_cum_gpa", "total_chrs", "term_chrs", "sterm", "first_term"]
    c_cols = ["lterm_cgpa", "lterm_cum_cgpa", "num_enrolled", "total_enrolled"]
    out = keys.merge(st[["sid", "termnum"] + s_cols], on=["sid", "termnum"], how="left")
    out = out.merge(ct[["cid", "termnum"] + c_cols], on=["cid", "termnum"], how="left")
    out.index = df.index
    out["prior_gpa"] = df["hsgpa"] if "hsgpa" in df.columns else np.nan
    out["alevel"] = _alevel(out["total_chrs"].to_numpy())
    if "cohort" in df.columns and df["cohort"].notna().all():
        out["cohort"] = df["cohort"].astype(np.int64)
    else:
        out["cohort"] = out["first_term"].astype(np.int64)
    out = out[DERIVED_COLUMNS + ["cohort"]]
    if as_of is not None:
        out = out[df["termnum"].to_numpy() == as_of]
    return out


def with_derived(frame: pd.DataFrame) -> pd.DataFrame:
    """Return ``frame`` joined with its derived features."""
    d = derive_features(frame)
    base = frame.drop(columns=[c for c in d.columns if c in frame.columns])
    return pd.concat([base, d], axis=1)


def classify_cold_start(record, seen_students, seen_courses) -> ColdStartClass:
    sid = record["sid"] if isinstance(record, dict) else record.sid
    cid = record["cid"] if isinstance(record, dict) else record.cid
    s_new = sid not in seen_students
    c_new = cid not in seen_courses
    if s_new and c_new:
        return ColdStartClass.CSB
    if s_new:
        return ColdStartClass.CSS
    if c_new:
        return ColdStartClass.CSC
    return ColdStartClass.NCS


def cold_start_classes(rows: pd.DataFrame, train: pd.DataFrame) -> np.ndarray:
    """Vectorized :func:`classify_cold_start` against the ids present in ``train``."""
    s_new = ~rows["sid"].isin(set(train["sid"])).to_numpy()
    c_new = ~rows["cid"].isin(set(train["cid"])).to_numpy()
    out = np.full(len(rows), "NCS", dtype=object)
    out[s_new & ~c_new] = "CSS"
    out[~s_new & c_new] = "CSC"
    out[s_new & c_new] = "CSB"
    return out


def cold_start_summary(frame: pd.DataFrame) -> pd.DataFrame:
    """Per-term dyad counts by cold-start class, shaped like a registrar summary table."""
    rows = []
    for t in sorted(frame["termnum"].unique()):
        train = frame[frame["termnum"] < t]
        cur = frame[frame["termnum"] == t]
        cls = cold_start_classes(cur, train)
        counts = {c.value: int(np.sum(cls == c.value)) for c in ColdStartClass}
        n = len(cur)
        cs = n - counts["NCS"]
        rows.append({"termnum": int(t), "dyads": n, **counts, "CS": cs, "pct_CS": round(100.0 * cs / n, 2)})
    return pd.DataFrame(rows)
