"""Classifiers, standardization, grouped cross-validation, and metrics."""

from .classifiers import (
    DEFAULT_PARAMS,
    ClassifierFamily,
    ClassifierSpec,
    DecisionTreeModel,
    KnnModel,
    LdaModel,
    LogisticRegressionModel,
    RandomForestModel,
    train,
)
from .evaluation import (
    CvResult,
    FoldDetail,
    FoldPlan,
    Metrics,
    PredictionRow,
    Standardizer,
    apply_standardizer,
    compute_metrics,
    cross_validate,
    cross_validate_table,
    fit_standardizer,
    group_kfold,
    read_predictions,
    write_predictions,
)

__all__ = [
    "ClassifierFamily",
    "ClassifierSpec",
    "DEFAULT_PARAMS",
    "LogisticRegressionModel",
    "LdaModel",
    "KnnModel",
    "DecisionTreeModel",
    "RandomForestModel",
    "train",
    "Standardizer",
    "fit_standardizer",
    "apply_standardizer",
    "FoldPlan",
    "group_kfold",
    "Metrics",
    "compute_metrics",
    "CvResult",
    "FoldDetail",
    "PredictionRow",
    "cross_validate",
    "cross_validate_table",
    "read_predictions",
    "write_predictions",
]
