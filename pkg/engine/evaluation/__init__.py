"""
Evaluation Module
=================

Monte-Carlo BLER estimation, SNR sweeps, active-versus-passive comparison,
result files and plots.
"""

from engine.evaluation.bler import (
    BlerPoint,
    count_errors,
    estimate_bler,
    model_simulator,
    prepare_for_evaluation,
    wilson_interval,
)
from engine.evaluation.plotting import plot_bler_curves
from engine.evaluation.results import (
    RESULT_COLUMNS,
    format_table,
    read_results,
    write_csv,
    write_results_csv,
    write_results_jsonl,
)
from engine.evaluation.sweep import (
    COMPARISON_COLUMNS,
    ModeComparison,
    bler_ratio,
    compare_modes,
    evaluate_point,
    sweep,
)


__all__ = [
    "COMPARISON_COLUMNS",
    "RESULT_COLUMNS",
    "BlerPoint",
    "ModeComparison",
    "bler_ratio",
    "compare_modes",
    "count_errors",
    "estimate_bler",
    "evaluate_point",
    "format_table",
    "model_simulator",
    "plot_bler_curves",
    "prepare_for_evaluation",
    "read_results",
    "sweep",
    "wilson_interval",
    "write_csv",
    "write_results_csv",
    "write_results_jsonl",
]
