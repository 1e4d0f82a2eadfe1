"""Cognitive-effort estimation from forehead oxygenation recordings.

Library layout: ``core`` (domain types and validation), ``ingest`` (CSV
dataset I/O), ``preprocess`` (filtering, Beer-Lambert conversion,
detrending, channel rejection), ``features`` (statistic, connectivity, and
difference features), ``ml`` (classifiers and grouped cross-validation),
``effort`` (efficiency/involvement coordinates), ``synth`` (ground-truth
generator), ``cli`` (command-line front end).
"""

__version__ = "0.1.0"

from .core import (
    DEFAULT_LAYOUT,
    DEFAULT_SESSION,
    ChannelLayout,
    Dataset,
    Region,
    SessionStructure,
    TrialKey,
    TrialRecord,
    ValidationReport,
    Violation,
    segment_of,
    session_of,
    validate_dataset,
)
from .effort import (
    AgreementReport,
    EffortMode,
    EffortPoint,
    QuadrantState,
    SegmentSummary,
    classify_state,
    compare,
    effort_points,
    effort_z,
    performance_z,
    rne_rni,
    summarize_segments,
)
from .errors import DataError
from .features import (
    FeatureSet,
    FeatureTable,
    FeatureVector,
    TrialMeta,
    assemble,
    basic_features,
    delta_features,
    fc_features,
    fc_matrix,
    read_feature_table,
    st_features,
    stat_features,
    write_feature_table,
)
from .ingest import (
    IntensityTrial,
    RawTrialTable,
    clean_column_names,
    impute_missing,
    load_dataset,
    load_intensity_trials,
    window_trial,
    write_dataset,
    write_intensity_trials,
)
from .ml import (
    ClassifierFamily,
    ClassifierSpec,
    CvResult,
    FoldPlan,
    Metrics,
    Standardizer,
    apply_standardizer,
    compute_metrics,
    cross_validate,
    cross_validate_table,
    fit_standardizer,
    group_kfold,
    read_predictions,
    train,
    write_predictions,
)
from .preprocess import (
    FilterTaps,
    MbllParams,
    apply_filter,
    design_lowpass_fir,
    detrend_linear,
    magnitude_response,
    mbll_convert,
    mbll_forward,
    preprocess_dataset,
    preprocess_hbo_trial,
    preprocess_intensity_trial,
    reject_channels,
)
from .synth import GroundTruth, SynthResult, SynthSpec, activation_waveform, generate, hrf

__all__ = [
    "__version__",
    "DataError",
    "Region",
    "ChannelLayout",
    "SessionStructure",
    "TrialRecord",
    "TrialKey",
    "Dataset",
    "Violation",
    "ValidationReport",
    "DEFAULT_LAYOUT",
    "DEFAULT_SESSION",
    "segment_of",
    "session_of",
    "validate_dataset",
    "RawTrialTable",
    "IntensityTrial",
    "clean_column_names",
    "impute_missing",
    "window_trial",
    "load_dataset",
    "write_dataset",
    "load_intensity_trials",
    "write_intensity_trials",
    "FilterTaps",
    "MbllParams",
    "design_lowpass_fir",
    "apply_filter",
    "magnitude_response",
    "mbll_convert",
    "mbll_forward",
    "detrend_linear",
    "reject_channels",
    "preprocess_hbo_trial",
    "preprocess_intensity_trial",
    "preprocess_dataset",
    "FeatureSet",
    "FeatureVector",
    "FeatureTable",
    "TrialMeta",
    "stat_features",
    "st_features",
    "fc_matrix",
    "fc_features",
    "basic_features",
    "delta_features",
    "assemble",
    "write_feature_table",
    "read_feature_table",
    "ClassifierFamily",
    "ClassifierSpec",
    "train",
    "Standardizer",
    "fit_standardizer",
    "apply_standardizer",
    "FoldPlan",
    "group_kfold",
    "Metrics",
    "compute_metrics",
    "CvResult",
    "cross_validate",
    "cross_validate_table",
    "write_predictions",
    "read_predictions",
    "EffortMode",
    "QuadrantState",
    "SegmentSummary",
    "EffortPoint",
    "AgreementReport",
    "summarize_segments",
    "performance_z",
    "effort_z",
    "rne_rni",
    "classify_state",
    "effort_points",
    "compare",
    "SynthSpec",
    "GroundTruth",
    "SynthResult",
    "hrf",
    "activation_waveform",
    "generate",
]
