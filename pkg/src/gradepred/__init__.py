"""Next-term grade prediction on student transcripts.

Baselines, matrix factorization, a Gibbs-sampled factorization machine,
regression models, MADImp / Gini feature importance and a leakage-safe
per-term evaluation harness.
"""

from .evaluation import (
    DEFAULT_PARAMS,
    MODEL_NAMES,
    EvaluationReport,
    Metrics,
    ModelSpec,
    TermRun,
    clip_prediction,
    compute_metrics,
    hybrid_fm_rf,
    importance_report,
    segment_report,
    sequential_evaluate,
)
from .encoding import encode, fit_encoder, select_features
from .grades import grade_from_letter, letter_from_grade
from .importance import (
    ImportanceReport,
    TermDecomposition,
    fm_decompose,
    gini_importance,
    madimp_aggregate,
    madimp_row,
    madimp_select,
)
from .ingest import parse_transcript_csv, write_transcript_csv
from .synth import SynthConfig, generate_synthetic, write_synthetic
from .transcript import ColdStartClass, TranscriptRecord, cold_start_classes, derive_features

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PARAMS", "MODEL_NAMES", "ColdStartClass", "EvaluationReport", "ImportanceReport", "Metrics",
    "ModelSpec", "SynthConfig", "TermDecomposition", "TermRun", "TranscriptRecord", "clip_prediction",
    "cold_start_classes", "compute_metrics", "derive_features", "encode", "fit_encoder", "fm_decompose",
    "generate_synthetic", "gini_importance", "grade_from_letter", "hybrid_fm_rf", "importance_report",
    "letter_from_grade", "madimp_aggregate", "madimp_row", "madimp_select", "parse_transcript_csv",
    "segment_report", "select_features", "sequential_evaluate", "write_synthetic", "write_transcript_csv",
]
