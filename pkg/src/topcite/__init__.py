"""Percentile-rank citation indicators: top-k% participation, I3, and field-normalisation baselines."""

from .corpus import (
    ALL,
    DEFAULT_DOCTYPES,
    Corpus,
    CorpusView,
    DataError,
    DocType,
    EmptySubsetError,
    Entity,
    LoadError,
    PublicationRecord,
    SubsetFilter,
    ValidationReport,
    SummaryStats,
    categories,
    corpus_stats,
    countries,
    doctypes,
    load_bloc_mapping,
    load_corpus,
    resolve_entities,
    validate_corpus,
    write_corpus,
    years,
)
from .indicators import (
    CountingMethod,
    IndicatorReport,
    country_attribution,
    esi_refined_ranks,
    expected_topk,
    i3,
    indicator_reports,
    mncs,
    p_topk,
    pct_i3,
    pp_topk,
    rc_scores,
    refined_pp_topk,
)
from .percentile import (
    PercentileScheme,
    RankAssignment,
    Threshold,
    pearson,
    percentile_ranks,
    top_class,
    top_class_threshold,
    window_thresholds,
)
from .stats import ZTestResult, chi_square_2x2, z_one_sample, z_two_proportions

__version__ = "0.1.0"
