"""Command-line front end: ``gradepred synth|evaluate|importance|report``.

A run is described by a JSON config; command-line flags override its fields::

    {
      "seed": 0,                          required (or --seed)
      "input": "transcript.csv",          or "synth": {SynthConfig fields}
      "models": ["gm", {"name": "fm", "params": {"iterations": 100}}],
      "feature_policy": "features.json",  optional
      "output_dir": "out/",               default $GRADEPRED_OUT or ./gradepred-out
      "exclude_summers": false,
      "feature_selection": {"enabled": false, "threshold": 0.001},
      "terms": null                       optional list of terms to predict
    }
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import pandas as pd

from .encoding import load_feature_policy
from .evaluation import (
    MODEL_NAMES,
    EvaluationReport,
    ModelSpec,
    hybrid_fm_rf,
    importance_report,
    sequential_evaluate,
    write_dump,
)
from .ingest import parse_transcript_csv
from .synth import SynthConfig, generate_synthetic, write_synthetic
from .transcript import cold_start_summary

OUT_ENV = "GRADEPRED_OUT"
MADIMP_MODELS = ("fm", "fm-ids-only", "pmlr", "sgd")
GINI_MODELS = ("rf",)

log = logging.getLogger("gradepred")


class UsageError(Exception):
    pass


@dataclasses.dataclass
class RunConfig:
    seed: int
    input: str | None = None
    synth: dict | None = None
    models: list = dataclasses.field(default_factory=lambda: ["gm"])
    feature_policy: str | None = None
    output_dir: str | None = None
    exclude_summers: bool = False
    feature_selection: dict = dataclasses.field(default_factory=lambda: {"enabled": False, "threshold": 0.001})
    terms: list | None = None

    def validate(self) -> None:
        if self.seed is None:
            raise UsageError("a seed is required (config 'seed' or --seed)")
        if self.input is None and self.synth is None:
            raise UsageError("config needs either 'input' or 'synth'")
        for p in (self.input, self.feature_policy):
            if p is not None and not Path(p).exists():
                raise UsageError(f"path does not exist: {p}")
        self.model_specs()

    def model_specs(self) -> list[ModelSpec]:
        fs = self.feature_selection or {}
        thr = float(fs.get("threshold", 0.001)) if fs.get("enabled") else None
        specs = []
        for m in self.models:
            name, params = (m, {}) if isinstance(m, str) else (m.get("name"), dict(m.get("params", {})))
            if name not in MODEL_NAMES:
                raise UsageError(f"unknown model {name!r}; valid names: {', '.join(MODEL_NAMES)}")
            try:
                specs.append(ModelSpec(name, params, thr if name == "fm" else None))
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        return specs

    def out_dir(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUT_ENV) or "gradepred-out")


def load_config(args) -> RunConfig:
    raw = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from None
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise UsageError(f"unknown config field(s): {sorted(unknown)}")
    raw.setdefault("seed", None)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.input:
        raw["input"], raw["synth"] = args.input, None
    if args.out:
        raw["output_dir"] = args.out
    if args.models:
        raw["models"] = [m.strip() for m in args.models.split(",") if m.strip()]
    if getattr(args, "feature_policy", None):
        raw["feature_policy"] = args.feature_policy
    if getattr(args, "exclude_summers", False):
        raw["exclude_summers"] = True
    if getattr(args, "select_threshold", None) is not None:
        raw["feature_selection"] = {"enabled": True, "threshold": args.select_threshold}
    if raw.get("input") is None and raw.get("synth") is None:
        raw["synth"] = {}
    cfg = RunConfig(**raw)
    cfg.validate()
    return cfg


def load_frame(cfg: RunConfig) -> pd.DataFrame:
    if cfg.input is not None:
        parsed = parse_transcript_csv(cfg.input)
        log.info("read %d rows (%d ungraded dropped)", len(parsed.frame), parsed.dropped_grades)
        return parsed.frame
    fields = {f.name for f in dataclasses.fields(SynthConfig)}
    bad = set(cfg.synth) - fields
    if bad:
        raise UsageError(f"unknown synth field(s): {sorted(bad)}")
    return generate_synthetic(SynthConfig(**{"seed": cfg.seed, **cfg.synth})).frame


def _write(path: Path, text: str) -> None:
    path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def _tables(report: EvaluationReport, out: Path, stem: str) -> None:
    report.segment_frame().to_csv(out / f"segments_{stem}.csv", index=False, lineterminator="\n")
    report.per_term.to_csv(out / f"per_term_{stem}.csv", index=False, lineterminator="\n")
    report.heatmap.to_csv(out / f"heatmap_{stem}.csv", index=False, lineterminator="\n")


# ---------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    fields = {f.name for f in dataclasses.fields(SynthConfig)}
    overrides = {}
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        overrides = overrides.get("synth", overrides)
        bad = set(overrides) - fields
        if bad:
            raise UsageError(f"unknown synth field(s): {sorted(bad)}")
    try:
        cfg = SynthConfig(**{**overrides, "seed": args.seed})
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    data = generate_synthetic(cfg)
    paths = write_synthetic(data, args.out)
    summary = cold_start_summary(data.frame)
    summary.to_csv(Path(args.out) / "cold_start_summary.csv", index=False, lineterminator="\n")
    print(summary.to_string(index=False))
    print(f"wrote {paths['transcript']} ({len(data.frame)} dyads) and {paths['truth']}")
    return 0


def _run_models(cfg: RunConfig, frame, specs, want_importance=False):
    policy = load_feature_policy(cfg.feature_policy) if cfg.feature_policy else None
    names = [s.name for s in specs]
    if "hybrid" in names:
        for dep in ("fm", "rf"):
            if dep not in names:
                specs.append(ModelSpec(dep))
                names.append(dep)
    results = {}
    for spec in specs:
        if spec.name == "hybrid":
            continue
        log.info("evaluating %s", spec.name)
        results[spec.name] = sequential_evaluate(
            frame, spec, cfg.seed, cfg.terms, policy, want_importance, cfg.exclude_summers)
    if "hybrid" in names:
        from .evaluation import summer_terms

        results["hybrid"] = hybrid_fm_rf(results["fm"].runs, results["rf"].runs,
                                         summer_terms(frame), cfg.exclude_summers)
    return results


def cmd_evaluate(args) -> int:
    cfg = load_config(args)
    frame = load_frame(cfg)
    out = cfg.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    results = _run_models(cfg, frame, cfg.model_specs())
    summary = []
    for name, ev in results.items():
        stem = name
        write_dump(ev.runs, out / f"predictions_{stem}.csv")
        _write(out / f"report_{stem}.json", ev.report.to_json())
        _tables(ev.report, out, stem)
        seg = ev.report.segments
        summary.append({"model": name, **{f"{k}_rmse": (None if v is None else v.rmse) for k, v in seg.items()}})
    pd.DataFrame(summary).to_csv(out / "summary.csv", index=False, lineterminator="\n")
    print(pd.DataFrame(summary).set_index("model").round(4).to_string())
    return 0


def cmd_importance(args) -> int:
    cfg = load_config(args)
    specs = cfg.model_specs()
    for s in specs:
        if s.name not in MADIMP_MODELS + GINI_MODELS:
            raise UsageError(f"no importance decomposition for {s.name!r}; "
                             f"MADImp supports {', '.join(MADIMP_MODELS)}, Gini supports rf")
    frame = load_frame(cfg)
    out = cfg.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    results = _run_models(cfg, frame, specs, want_importance=True)
    for name, ev in results.items():
        rep = importance_report(ev)
        rep.to_csv(out / f"importance_{name}.csv")
        rep.per_term_csv(out / f"importance_{name}_per_term.csv")
        _write(out / f"importance_{name}.json", rep.to_json())
        print(f"{name} ({rep.method})")
        print(rep.to_frame().head(15).to_string(index=False))
    return 0


def cmd_report(args) -> int:
    path = Path(args.report)
    if not path.exists():
        raise UsageError(f"report not found: {path}")
    try:
        report = EvaluationReport.from_json(path.read_text())
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UsageError(f"not an evaluation report: {path} ({exc})") from None
    out = Path(args.out or os.environ.get(OUT_ENV) or path.parent)
    out.mkdir(parents=True, exist_ok=True)
    _tables(report, out, report.model or path.stem)
    print(report.segment_frame().to_string(index=False))
    return 0


# ---------------------------------------------------------------- parser

def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run configuration JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--input", help="transcript CSV (overrides synth)")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV})")
    p.add_argument("--models", help="comma-separated model names: " + ",".join(MODEL_NAMES))
    p.add_argument("--feature-policy", help="feature policy JSON")
    p.add_argument("--exclude-summers", action="store_true", help="drop summer terms from cohort heatmaps")
    p.add_argument("--select-threshold", type=float, help="enable MADImp feature selection for fm")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradepred", description="Sequential next-term grade prediction")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic transcript")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON of SynthConfig overrides")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("evaluate", help="run the per-term evaluation for one or more models")
    _run_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("importance", help="MADImp / Gini feature importance reports")
    _run_flags(p)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("report", help="re-render a report JSON as CSV tables")
    p.add_argument("report", help="report_<model>.json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gradepred: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a failed run
        print(f"gradepred: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
