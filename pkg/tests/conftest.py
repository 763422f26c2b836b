import numpy as np
import pandas as pd
import pytest

from gradepred.synth import SynthConfig, generate_synthetic


@pytest.fixture(scope="session")
def small_data():
    cfg = SynthConfig(seed=11, n_students=260, n_courses=50, n_instructors=30, n_terms=5,
                      n_majors=5, n_disciplines=6, n_institutions=8)
    return generate_synthetic(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tiny_frame():
    """Two students, three courses, three terms, hand-checkable grades."""
    rows = [
        # sid, cid, term, grade, chrs
        ("a", "c1", 0, 4.0, 3.0),
        ("a", "c2", 0, 2.0, 1.0),
        ("b", "c1", 0, 3.0, 3.0),
        ("a", "c3", 1, 3.0, 3.0),
        ("b", "c2", 1, 1.0, 1.0),
        ("a", "c1", 2, 2.0, 3.0),
        ("b", "c3", 2, 4.0, 3.0),
        ("c", "c3", 2, 3.0, 3.0),
    ]
    df = pd.DataFrame(rows, columns=["sid", "cid", "termnum", "grdpts", "chrs"])
    df["hsgpa"] = df["sid"].map({"a": 3.5, "b": 3.0, "c": 2.5})
    return df


# one verdict line per acceptance criterion, printed after the run
VERDICTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[n])
