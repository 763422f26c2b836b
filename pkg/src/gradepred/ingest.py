"""CSV transcript reading and writing."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .grades import LETTER_POINTS, GradeError, letter_from_grade
from .transcript import RECORD_COLUMNS, normalize_frame

log = logging.getLogger(__name__)

REQUIRED_CSV_COLUMNS = ("sid", "cid", "termnum", "grade")
NUMERIC_COLUMNS = ("age", "sat", "hsgpa", "chrs")
INT_COLUMNS = ("clevel", "cohort")
CSV_COLUMNS = [c if c != "grdpts" else "grade" for c in RECORD_COLUMNS]


class TranscriptFormatError(ValueError):
    pass


@dataclass
class SchemaConfig:
    letters: dict[str, float] = field(default_factory=lambda: dict(LETTER_POINTS))
    max_malformed_fraction: float = 0.01
    grade_column: str = "grade"


@dataclass
class ParsedTranscript:
    frame: pd.DataFrame
    n_rows: int
    dropped_grades: int
    errors: list[str]


def _parse_grade(token: str, letters: dict[str, float]) -> float | None:
    tok = token.strip()
    if not tok:
        return None
    up = tok.upper()
    if up in letters:
        return letters[up]
    try:
        v = float(tok)
    except ValueError:
        return None
    return v if 0.0 <= v <= 4.0 else None


def _parse_bool(token: str) -> bool:
    return token.strip().lower() in {"1", "true", "t", "yes", "y"}


def parse_transcript_csv(path, schema: SchemaConfig | None = None) -> ParsedTranscript:
    """Read a one-row-per-dyad transcript CSV.

    Rows whose grade has no grade-point equivalent (withdrawals, audits,
    blanks) are dropped and counted.  Structurally malformed rows are
    reported with their line number; the file is rejected when they exceed
    ``schema.max_malformed_fraction`` of all data rows.
    """
    schema = schema or SchemaConfig()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TranscriptFormatError(f"{path}: empty file") from None
        gcol = schema.grade_column
        if gcol not in header and "grdpts" in header:
            gcol = "grdpts"
        required = [c if c != "grade" else gcol for c in REQUIRED_CSV_COLUMNS]
        for col in required:
            if col not in header:
                raise TranscriptFormatError(f"{path}: missing required column {col!r}")
        pos = {name: i for i, name in enumerate(header)}
        rows, errors = [], []
        dropped = 0
        n = 0
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not x.strip() for x in raw):
                continue
            n += 1
            if len(raw) != len(header):
                errors.append(f"line {lineno}: expected {len(header)} fields, got {len(raw)}")
                continue
            rec = {name: raw[i].strip() for name, i in pos.items()}
            if not rec["sid"] or not rec["cid"]:
                errors.append(f"line {lineno}: empty sid/cid")
                continue
            try:
                rec["termnum"] = int(rec["termnum"])
                if rec["termnum"] < 0:
                    raise ValueError
            except ValueError:
                errors.append(f"line {lineno}: bad termnum {raw[pos['termnum']]!r}")
                continue
            g = _parse_grade(rec.pop(gcol), schema.letters)
            if g is None:
                dropped += 1
                continue
            rec["grdpts"] = g
            try:
                for c in NUMERIC_COLUMNS:
                    if c in rec:
                        rec[c] = float(rec[c]) if rec[c] else np.nan
                for c in INT_COLUMNS:
                    if c in rec:
                        rec[c] = int(float(rec[c])) if rec[c] else None
            except ValueError as exc:
                errors.append(f"line {lineno}: {exc}")
                continue
            if "transfer" in rec:
                rec["transfer"] = _parse_bool(rec["transfer"])
            for c, v in rec.items():
                if v == "":
                    rec[c] = None
            rows.append(rec)
    if n and len(errors) / n > schema.max_malformed_fraction:
        raise TranscriptFormatError(
            f"{path}: {len(errors)} of {n} rows malformed; first: {errors[0]}"
        )
    for e in errors:
        log.warning("%s: %s", path, e)
    frame = pd.DataFrame(rows)
    if frame.empty:
        frame = pd.DataFrame(columns=["sid", "cid", "termnum", "grdpts"])
    if "clevel" in frame.columns:
        frame["clevel"] = frame["clevel"].astype("Int64")
    if "cohort" in frame.columns and frame["cohort"].notna().all():
        frame["cohort"] = frame["cohort"].astype(np.int64)
    return ParsedTranscript(normalize_frame(frame), n, dropped, errors)


def _grade_token(v: float) -> str:
    if v is None or np.isnan(v):
        return ""
    try:
        return letter_from_grade(v)
    except GradeError:
        return repr(float(v))


def write_transcript_csv(frame: pd.DataFrame, path) -> None:
    """Write a transcript frame in the CSV ingestion format (grades as letters)."""
    out = pd.DataFrame(index=frame.index)
    extra = [c for c in frame.columns if c not in RECORD_COLUMNS]
    for c in CSV_COLUMNS + extra:
        src = "grdpts" if c == "grade" else c
        if src not in frame.columns:
            continue
        col = frame[src]
        if c == "grade":
            col = col.map(_grade_token)
        elif c == "transfer":
            col = col.astype(bool).map({True: "1", False: "0"})
        out[c] = col
    if "iid" in out.columns and "institution_id" in out.columns:
        out["iid"] = out["iid"].where(out["institution_id"].isna(), None)
    out.to_csv(path, index=False, lineterminator="\n", float_format="%.6g")
