"""Subpopulation-level evaluation of deception classifiers on link-sharing archives."""

from .baselines import Baseline, BaselinePrediction, run_baselines
from .characteristics import (
    AcceptanceScore,
    CharacteristicTable,
    aggregate_author_rolling,
    aggregate_community,
    aggregate_rolling,
    gini,
    normalize_scores,
)
from .core import (
    DomainList,
    FormatConfig,
    Label,
    LabeledPost,
    MonthKey,
    Post,
    PredictionRecord,
    SourceAnnotation,
    build_dataset,
    extract_domain,
    label_posts,
    measure_coverage,
    parse_archive,
)
from .evaluation import (
    CorrelationEntry,
    GroupReport,
    MetricBundle,
    acceptance_decile_analysis,
    correlate_confidence,
    correlate_group_metrics,
    group_metrics,
    metrics,
)
from .stats import kde, pearson
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "AcceptanceScore",
    "Baseline",
    "BaselinePrediction",
    "CharacteristicTable",
    "CorrelationEntry",
    "DomainList",
    "FormatConfig",
    "GroupReport",
    "Label",
    "LabeledPost",
    "MetricBundle",
    "MonthKey",
    "Post",
    "PredictionRecord",
    "SourceAnnotation",
    "SynthConfig",
    "acceptance_decile_analysis",
    "aggregate_author_rolling",
    "aggregate_community",
    "aggregate_rolling",
    "build_dataset",
    "correlate_confidence",
    "correlate_group_metrics",
    "extract_domain",
    "generate",
    "gini",
    "group_metrics",
    "kde",
    "label_posts",
    "measure_coverage",
    "metrics",
    "normalize_scores",
    "parse_archive",
    "pearson",
    "run_baselines",
]
