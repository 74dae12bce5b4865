"""Mann-Whitney U, SEM, and significance tables."""

from .significance import CSV_COLUMNS, SignificanceRow, build_significance_table, significance_csv
from .tests import MannWhitneyResult, mann_whitney_u, rankdata, sem, spearman

__all__ = [
    "CSV_COLUMNS", "MannWhitneyResult", "SignificanceRow", "build_significance_table",
    "mann_whitney_u", "rankdata", "sem", "significance_csv", "spearman",
]
