from earbench.stats.anova import (
    AnovaError,
    AnovaResult,
    ConstantDataError,
    anova_from_matrix,
    gg_corrected_dfs,
    gg_epsilon,
    mixed_anova,
    orthonormal_contrasts,
    rm_anova_2way,
)
from earbench.stats.tables import (
    CellSummary,
    ScoreRow,
    ScoreTable,
    TableError,
    summarize_conditions,
)
from earbench.stats.tukey import ContrastResult, emm_tukey, srange_cdf, srange_sf

__all__ = [
    "AnovaError",
    "AnovaResult",
    "CellSummary",
    "ConstantDataError",
    "ContrastResult",
    "ScoreRow",
    "ScoreTable",
    "TableError",
    "anova_from_matrix",
    "emm_tukey",
    "gg_corrected_dfs",
    "gg_epsilon",
    "mixed_anova",
    "orthonormal_contrasts",
    "rm_anova_2way",
    "srange_cdf",
    "srange_sf",
    "summarize_conditions",
]
