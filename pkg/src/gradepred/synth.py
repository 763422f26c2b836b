"""Synthetic transcripts with planted biases and low-rank interactions.

Grades are generated as::

    round_to_grid(clip(mu + b_student + b_course + b_instructor + u_s . v_c + eps))

New students arrive each term; a fraction of them are transfer students
whose arrival term also carries transfer-credit dyads with upward-shifted,
compressed grades and an institution id in place of an instructor.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .grades import round_to_grid, term_calendar
from .ingest import write_transcript_csv

RACES = ["white", "black", "asian", "hispanic", "other", "unspecified"]
SEXES = ["F", "M", "unspecified"]
ICLASS = ["Adjunct", "Full time", "Part time", "GRA", "GTA"]
IRANK = ["Instructor", "Assistant Professor", "Associate Professor", "Eminent Scholar", "University Professor"]
ITENURE = ["Term", "Tenure-track", "Tenured"]


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_students: int = 3300
    n_courses: int = 400
    n_instructors: int = 300
    n_terms: int = 10
    latent_rank: int = 2
    global_mean: float = 2.9
    bias_std_student: float = 0.5
    bias_std_course: float = 0.4
    bias_std_instructor: float = 0.2
    interaction_std: float = 0.3
    noise_std: float = 0.5
    transfer_fraction: float = 0.4
    new_student_rate: float = 0.25
    n_noise_features: int = 0
    noise_levels: int = 10
    courses_per_term: float = 4.0
    summer_enroll_fraction: float = 0.2
    new_course_rate: float = 0.1
    attrition: float = 0.08
    transfer_credits: int = 6
    transfer_shift: float = 0.3
    transfer_scale: float = 0.5
    n_institutions: int = 40
    content_signal: float = 0.7
    n_majors: int = 20
    n_disciplines: int = 15
    start_season: str = "Fall"
    start_year: int = 2009

    def __post_init__(self):
        for name in ("n_students", "n_courses", "n_instructors", "n_terms", "latent_rank"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("transfer_fraction", "new_student_rate", "summer_enroll_fraction",
                     "new_course_rate", "content_signal", "attrition"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.new_student_rate >= 1.0:
            raise ValueError("new_student_rate must be < 1")
        for name in ("bias_std_student", "bias_std_course", "bias_std_instructor",
                     "interaction_std", "noise_std", "n_noise_features"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class SynthDataset:
    frame: pd.DataFrame
    config: SynthConfig
    truth: dict = field(repr=False)
    expected: np.ndarray = field(repr=False)  # noiseless latent grade per row

    def truth_json(self) -> str:
        return json.dumps({"config": asdict(self.config), **self.truth}, sort_keys=True, indent=1)


def _arrivals(cfg: SynthConfig, summers: np.ndarray) -> np.ndarray:
    """New-student counts per term so that about ``new_student_rate`` of each term's enrollers are new."""
    r, d = cfg.new_student_rate, cfg.attrition
    new = np.zeros(cfg.n_terms)
    new[0] = 1.0
    active = 1.0
    for t in range(1, cfg.n_terms):
        active *= 1.0 - d
        returning = active * (cfg.summer_enroll_fraction if summers[t] else 1.0)
        new[t] = r / (1.0 - r) * returning
        active += new[t]
    cum = np.round(np.cumsum(new) * cfg.n_students / new.sum()).astype(int)
    cum[-1] = cfg.n_students
    return np.diff(np.concatenate([[0], cum]))


def _factor_std(cfg: SynthConfig) -> float:
    # var(u . v) = rank * a**4 for iid N(0, a^2) entries
    return (cfg.interaction_std**2 / cfg.latent_rank) ** 0.25 if cfg.interaction_std > 0 else 0.0


def generate_synthetic(config: SynthConfig) -> SynthDataset:
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    terms = term_calendar(cfg.n_terms, cfg.start_season, cfg.start_year)
    a = _factor_std(cfg)

    # courses
    nc = cfg.n_courses
    cids = np.array([f"c{j:04d}" for j in range(nc)])
    c_disc = rng.integers(cfg.n_disciplines, size=nc)
    c_chrs = rng.choice([3.0, 4.0, 1.0, 2.0], p=[0.8, 0.1, 0.05, 0.05], size=nc)
    c_level = rng.choice([1, 2, 3, 4, 5, 6, 7], p=[0.3, 0.3, 0.2, 0.12, 0.04, 0.02, 0.02], size=nc)
    c_pop = rng.lognormal(0.0, 0.8, size=nc)
    c_intro = np.where(rng.random(nc) < cfg.new_course_rate, rng.integers(1, max(cfg.n_terms, 2), size=nc), 0)
    b_c = rng.normal(0.0, cfg.bias_std_course, size=nc)
    v_c = rng.normal(0.0, a, size=(nc, cfg.latent_rank))

    # instructors, pooled by discipline
    ni = cfg.n_instructors
    iids = np.array([f"i{j:04d}" for j in range(ni)])
    i_disc = np.concatenate([np.arange(min(ni, cfg.n_disciplines)),
                             rng.integers(cfg.n_disciplines, size=max(0, ni - cfg.n_disciplines))])
    i_class = rng.integers(len(ICLASS), size=ni)
    i_rank = rng.integers(len(IRANK), size=ni)
    i_tenure = rng.integers(len(ITENURE), size=ni)
    b_i = rng.normal(0.0, cfg.bias_std_instructor, size=ni)
    pools = [np.flatnonzero(i_disc == d) for d in range(cfg.n_disciplines)]
    pools = [p if len(p) else np.arange(ni) for p in pools]

    # students
    ns = cfg.n_students
    arrivals = _arrivals(cfg, np.array([tm.is_summer for tm in terms]))
    s_cohort = np.repeat(np.arange(cfg.n_terms), arrivals)
    s_exit = s_cohort + 1 + rng.geometric(cfg.attrition, size=ns) if cfg.attrition > 0 else np.full(ns, cfg.n_terms)
    sids = np.array([f"s{j:05d}" for j in range(ns)])
    s_transfer = rng.random(ns) < cfg.transfer_fraction
    b_s = rng.normal(0.0, cfg.bias_std_student, size=ns)
    u_s = rng.normal(0.0, a, size=(ns, cfg.latent_rank))
    z = b_s / cfg.bias_std_student if cfg.bias_std_student > 0 else rng.normal(size=ns)
    cs = cfg.content_signal
    signal = cs * z + np.sqrt(1.0 - cs**2) * rng.normal(size=ns)
    s_hsgpa = np.round(np.clip(3.1 + 0.45 * signal, 0.0, 4.0), 2)
    s_sat = np.round(np.clip(1100 + 150 * (cs * z + np.sqrt(1 - cs**2) * rng.normal(size=ns)), 400, 1600), -1)
    s_sat[rng.random(ns) < 0.2] = np.nan
    s_age = np.where(s_transfer, rng.integers(19, 35, size=ns), rng.integers(17, 20, size=ns)).astype(float)
    s_major = rng.integers(cfg.n_majors, size=ns)
    s_race = rng.choice(len(RACES), p=[0.45, 0.12, 0.18, 0.13, 0.07, 0.05], size=ns)
    s_sex = rng.choice(len(SEXES), p=[0.5, 0.47, 0.03], size=ns)
    s_zip = rng.integers(200, size=ns)
    s_hs = rng.integers(300, size=ns)
    s_inst = rng.integers(cfg.n_institutions, size=ns)

    cols: dict[str, list] = {k: [] for k in ("s", "c", "t", "i", "inst", "xfer_row")}
    for t, term in enumerate(terms):
        summer = term.is_summer
        offered = (c_intro <= t) & (rng.random(nc) < (0.35 if summer else 0.9))
        if not offered.any():
            offered = c_intro <= t
        off_idx = np.flatnonzero(offered)
        p_off = c_pop[off_idx] / c_pop[off_idx].sum()
        instr = np.array([rng.choice(pools[c_disc[c]]) for c in range(nc)])

        active = np.flatnonzero((s_cohort <= t) & (s_exit > t))
        if summer:
            enroll = active[(rng.random(len(active)) < cfg.summer_enroll_fraction) | (s_cohort[active] == t)]
            n_take = 1 + rng.poisson(0.5, size=len(enroll))
        else:
            enroll = active
            n_take = 1 + rng.poisson(max(cfg.courses_per_term - 1.0, 0.0), size=len(enroll))
        n_take = np.minimum(n_take, min(7, len(off_idx)))
        for s, k in zip(enroll, n_take):
            chosen = rng.choice(off_idx, size=k, replace=False, p=p_off)
            for c in chosen:
                cols["s"].append(s); cols["c"].append(c); cols["t"].append(t)
                cols["i"].append(instr[c]); cols["inst"].append(-1); cols["xfer_row"].append(False)
            if s_transfer[s] and s_cohort[s] == t:
                avail = np.flatnonzero(c_intro <= t)
                k2 = min(cfg.transfer_credits, len(avail))
                for c in rng.choice(avail, size=k2, replace=False):
                    cols["s"].append(s); cols["c"].append(c); cols["t"].append(t)
                    cols["i"].append(-1); cols["inst"].append(s_inst[s]); cols["xfer_row"].append(True)

    s = np.array(cols["s"], dtype=int)
    c = np.array(cols["c"], dtype=int)
    t = np.array(cols["t"], dtype=int)
    i = np.array(cols["i"], dtype=int)
    inst = np.array(cols["inst"], dtype=int)
    xrow = np.array(cols["xfer_row"], dtype=bool)
    n = len(s)

    inter = np.einsum("nk,nk->n", u_s[s], v_c[c]) if n else np.zeros(0)
    bi = np.where(i >= 0, b_i[np.maximum(i, 0)], 0.0)
    expected = cfg.global_mean + b_s[s] + b_c[c] + bi + inter
    eps = rng.normal(0.0, cfg.noise_std, size=n)
    latent = expected + eps
    xfer_latent = cfg.global_mean + cfg.transfer_shift + cfg.transfer_scale * (latent - cfg.global_mean)
    latent = np.where(xrow, xfer_latent, latent)
    expected = np.where(xrow, cfg.global_mean + cfg.transfer_shift + cfg.transfer_scale * (expected - cfg.global_mean), expected)
    grades = round_to_grid(latent)

    frame = pd.DataFrame(
        {
            "sid": sids[s],
            "cid": cids[c],
            "termnum": t.astype(np.int64),
            "grdpts": grades,
            "iid": np.where(i >= 0, iids[np.maximum(i, 0)], None),
            "institution_id": np.where(inst >= 0, np.char.add("u", inst.astype(str)), None),
            "major": np.char.add("m", s_major[s].astype(str)),
            "race": np.array(RACES)[s_race[s]],
            "sex": np.array(SEXES)[s_sex[s]],
            "age": s_age[s] + (t // 3),
            "zip": np.char.add("z", s_zip[s].astype(str)),
            "sat": s_sat[s],
            "hs": np.char.add("h", s_hs[s].astype(str)),
            "hsgpa": s_hsgpa[s],
            "cohort": s_cohort[s].astype(np.int64),
            "transfer": s_transfer[s],
            "cdisc": np.char.add("d", c_disc[c].astype(str)),
            "chrs": c_chrs[c],
            "clevel": c_level[c].astype(np.int64),
            "iclass": np.where(i >= 0, np.array(ICLASS)[i_class[np.maximum(i, 0)]], None),
            "irank": np.where(i >= 0, np.array(IRANK)[i_rank[np.maximum(i, 0)]], None),
            "itenure": np.where(i >= 0, np.array(ITENURE)[i_tenure[np.maximum(i, 0)]], None),
        }
    )
    frame.loc[frame["iid"].isna(), "iid"] = "inst:" + frame.loc[frame["iid"].isna(), "institution_id"].astype(str)
    for f in range(cfg.n_noise_features):
        frame[f"noise_{f:02d}"] = np.char.add("n", rng.integers(cfg.noise_levels, size=n).astype(str))
    frame["season"] = [terms[k].season for k in t]

    order = np.lexsort((frame["cid"].to_numpy(), frame["sid"].to_numpy(), t))
    frame = frame.iloc[order].reset_index(drop=True)
    expected = expected[order]

    truth = {
        "global_mean": cfg.global_mean,
        "student_bias": dict(zip(sids.tolist(), np.round(b_s, 12).tolist())),
        "course_bias": dict(zip(cids.tolist(), np.round(b_c, 12).tolist())),
        "instructor_bias": dict(zip(iids.tolist(), np.round(b_i, 12).tolist())),
        "student_factors": dict(zip(sids.tolist(), np.round(u_s, 12).tolist())),
        "course_factors": dict(zip(cids.tolist(), np.round(v_c, 12).tolist())),
        "noise_features": [f"noise_{f:02d}" for f in range(cfg.n_noise_features)],
    }
    return SynthDataset(frame, cfg, truth, expected)


def write_synthetic(data: SynthDataset, out_dir) -> dict[str, Path]:
    """Write ``transcript.csv`` and the ``truth.json`` sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"transcript": out / "transcript.csv", "truth": out / "truth.json"}
    write_transcript_csv(data.frame, paths["transcript"])
    paths["truth"].write_text(data.truth_json() + "\n", encoding="utf-8")
    return paths
