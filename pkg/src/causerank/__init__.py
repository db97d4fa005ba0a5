"""causerank: interactive root-cause analysis over tagged time-series metrics.

Declare feature families with a small query language, generate (X, Y | Z)
hypothesis triples, score them with correlation or cross-validated ridge
regression (optionally after random projection), and rank candidate causes
with principled null-distribution p-values.
"""

from .engine import (
    Engine,
    Pseudocause,
    PseudocauseKind,
    RunRecord,
    Session,
    Workspace,
    derive_seed,
    load_table,
    make_pseudocause,
    save_table,
)
from .ingest import (
    AllMissing,
    MalformedRow,
    ParseResult,
    RawSeries,
    UnknownFormat,
    assemble_family,
    collect_series,
    interpolate_missing,
    parse_records,
    records_to_jsonl,
)
from .model import (
    CauseRankError,
    EmptyFamily,
    FamilyTable,
    FeatureFamily,
    Hypothesis,
    MetricRecord,
    OverlappingMetrics,
    PlotData,
    ScoreMethod,
    ScoreReport,
    TimeIndex,
    UnknownFamily,
    validate_hypothesis,
)
from .query import (
    DuplicateFamilyKey,
    QueryAst,
    QuerySyntaxError,
    UnknownFunction,
    build_family_table,
    evaluate_query,
    generate_hypotheses,
    parse_query,
    parse_query_file,
    pretty,
    union_results,
)
from .ranking import (
    Label,
    MethodSummary,
    RankedReport,
    ScenarioOutcome,
    discounted_gain,
    estimate_cost,
    first_cause_rank,
    rank,
    success_at_k,
    summarize,
)
from .scoring import (
    DegenerateTarget,
    RegressionResult,
    ScoringConfig,
    conditional_score,
    corr_max,
    corr_mean,
    cv_score,
    ols_fit,
    ols_residuals,
    pearson_matrix,
    random_project,
    ridge_cv_fit,
    ridge_fit,
    score_hypothesis,
)
from .stats import (
    DomainError,
    NullModel,
    adj_null_variance,
    benjamini_hochberg,
    bonferroni,
    chebyshev_pvalue,
    null_r2_model,
    ridge_effective_df,
    wherry_adjust,
)
from .synth import Scenario, ScenarioSpec, gen_chain, gen_null, gen_planted_cause, gen_seasonal_spike

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
