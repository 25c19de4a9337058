from ddrom.metrics.measures import (
    ErrorStatistics,
    TrajectoryErrors,
    errors_for_trajectory,
    gain,
    relative_error,
    sample_gains,
    statistics_summary,
)
from ddrom.metrics.reports import (
    ErrorReport,
    GainRow,
    GainTable,
    emit_reports,
    gain_table,
    read_gains_csv,
    regime_label,
)

__all__ = [
    "ErrorReport",
    "ErrorStatistics",
    "GainRow",
    "GainTable",
    "TrajectoryErrors",
    "emit_reports",
    "errors_for_trajectory",
    "gain",
    "gain_table",
    "read_gains_csv",
    "regime_label",
    "relative_error",
    "sample_gains",
    "statistics_summary",
]
