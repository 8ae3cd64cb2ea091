"""Authentication metrics and train-synthetic/test-real harnesses."""

from .metrics import (
    EerInterval, MetricsError, MetricsReport, RocCurve, ScoreSet, auroc, eer_interval,
    evaluate_scores, far_at_zero, mean_reports, roc_curve, write_roc_csv,
)
from .tstr import (
    TstrConfig, TstrError, enrolment_sweep, sweep_curves, tstr_auth, tstr_intent, write_sweep_csv,
)

__all__ = [
    "EerInterval", "MetricsError", "MetricsReport", "RocCurve", "ScoreSet", "TstrConfig", "TstrError",
    "auroc", "eer_interval", "enrolment_sweep", "evaluate_scores", "far_at_zero", "mean_reports",
    "roc_curve", "sweep_curves", "tstr_auth", "tstr_intent", "write_roc_csv", "write_sweep_csv",
]
