from .metrics import (
    EvalReport,
    Roc,
    ScoreSet,
    aggregate_by_group,
    eer,
    eer_from_roc,
    evaluate,
    format_scores,
    hter,
    operating_threshold,
    rates_at,
    read_scores,
    roc_curve,
    write_roc_csv,
    write_scores,
)
from .protocol import CrossEvalEntry, CrossEvalResult, cross_eval
