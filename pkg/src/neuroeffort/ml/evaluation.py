"""Standardization, participant-grouped cross-validation, and metrics.

Evaluation keeps every trial of a participant inside a single fold so test
participants are never seen during training. The standardizer and model are
fitted on training folds only; per-fold standardizer states are retained so
tests can verify no full-dataset refit happened.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..core import Dataset
from ..errors import DataError
from ..features import FeatureSet, FeatureTable, assemble
from .classifiers import ClassifierSpec, train

__all__ = [
    "Standardizer",
    "fit_standardizer",
    "apply_standardizer",
    "FoldPlan",
    "group_kfold",
    "Metrics",
    "compute_metrics",
    "PredictionRow",
    "FoldDetail",
    "CvResult",
    "cross_validate",
    "cross_validate_table",
    "write_predictions",
    "read_predictions",
]


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature location/scale learned from training rows only."""

    names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        for attr in ("mean", "std"):
            arr = np.asarray(getattr(self, attr), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        if self.mean.shape != (len(self.names),) or self.std.shape != self.mean.shape:
            raise ValueError("mean/std length must match feature names")


def fit_standardizer(table: FeatureTable) -> Standardizer:
    if len(table) == 0:
        raise DataError("cannot fit a standardizer on an empty table")
    values = table.values
    return Standardizer(
        names=table.names,
        mean=values.mean(axis=0),
        std=values.std(axis=0),
    )


def apply_standardizer(s: Standardizer, table: FeatureTable) -> np.ndarray:
    """Return z-scored values; zero-variance features map to 0."""
    if table.names != s.names:
        raise ValueError("feature names do not match the fitted standardizer")
    centered = table.values - s.mean
    return np.where(s.std > 0.0, centered / np.where(s.std > 0.0, s.std, 1.0), 0.0)


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Assignment of every participant to exactly one fold."""

    n_splits: int
    assignments: dict[str, int]

    def __post_init__(self) -> None:
        folds = set(self.assignments.values())
        if not folds <= set(range(self.n_splits)):
            raise ValueError("fold indices out of range")
        sizes = self.sizes
        if sizes and max(sizes) - min(sizes) > 1:
            raise ValueError(f"fold sizes {sizes} differ by more than 1")

    @property
    def sizes(self) -> tuple[int, ...]:
        counts = [0] * self.n_splits
        for fold in self.assignments.values():
            counts[fold] += 1
        return tuple(counts)

    def test_participants(self, fold: int) -> tuple[str, ...]:
        return tuple(sorted(p for p, f in self.assignments.items() if f == fold))

    def train_participants(self, fold: int) -> tuple[str, ...]:
        return tuple(sorted(p for p, f in self.assignments.items() if f != fold))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FoldPlan):
            return NotImplemented
        return self.n_splits == other.n_splits and self.assignments == other.assignments


def group_kfold(
    participants: Sequence[str], n_splits: int = 5, seed: int = 0
) -> FoldPlan:
    """Shuffle participants with the seed and split into near-equal folds."""
    participants = list(participants)
    if len(set(participants)) != len(participants):
        raise ValueError("participants must be unique")
    if n_splits < 2:
        raise ValueError("n_splits must be >= 2")
    if n_splits > len(participants):
        raise ValueError(
            f"n_splits={n_splits} exceeds {len(participants)} participants"
        )
    order = np.random.default_rng(seed).permutation(len(participants))
    assignments: dict[str, int] = {}
    for fold, chunk in enumerate(np.array_split(order, n_splits)):
        for i in chunk:
            assignments[participants[int(i)]] = fold
    return FoldPlan(n_splits=n_splits, assignments=assignments)


@dataclass(frozen=True)
class Metrics:
    """Accuracy plus support-weighted precision/recall/F1 and 2x2 counts.

    Confusion rows index the true class, columns the predicted class
    (0 then 1). Weighted recall always equals accuracy: summing
    support/total * per-class recall telescopes to correct/total.
    """

    accuracy: float
    precision_weighted: float
    recall_weighted: float
    f1_weighted: float
    confusion: tuple[tuple[int, int], tuple[int, int]]

    @classmethod
    def from_confusion(
        cls, confusion: Sequence[Sequence[int]]
    ) -> "Metrics":
        c = np.asarray(confusion, dtype=float)
        if c.shape != (2, 2) or (c < 0).any():
            raise ValueError("confusion must be a 2x2 matrix of counts")
        total = c.sum()
        if total == 0:
            raise ValueError("confusion matrix is empty")
        support = c.sum(axis=1)
        predicted = c.sum(axis=0)
        tp = np.diag(c)
        precision = np.divide(tp, predicted, out=np.zeros(2), where=predicted > 0)
        recall = np.divide(tp, support, out=np.zeros(2), where=support > 0)
        pr_sum = precision + recall
        f1 = np.divide(
            2 * precision * recall, pr_sum, out=np.zeros(2), where=pr_sum > 0
        )
        weights = support / total
        return cls(
            accuracy=float(tp.sum() / total),
            precision_weighted=float(weights @ precision),
            recall_weighted=float(weights @ recall),
            f1_weighted=float(weights @ f1),
            confusion=tuple(tuple(int(v) for v in row) for row in np.asarray(confusion)),
        )

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision_weighted": self.precision_weighted,
            "recall_weighted": self.recall_weighted,
            "f1_weighted": self.f1_weighted,
            "confusion": self.confusion,
        }


def compute_metrics(
    y_true: Sequence[int] | np.ndarray, y_pred: Sequence[int] | np.ndarray
) -> Metrics:
    yt = np.asarray(y_true, dtype=int)
    yp = np.asarray(y_pred, dtype=int)
    if yt.shape != yp.shape or yt.ndim != 1:
        raise ValueError(f"length mismatch: {yt.shape} vs {yp.shape}")
    if yt.size == 0:
        raise ValueError("empty label arrays")
    for arr in (yt, yp):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
    confusion = [
        [int(np.sum((yt == i) & (yp == j))) for j in (0, 1)] for i in (0, 1)
    ]
    return Metrics.from_confusion(confusion)


@dataclass(frozen=True)
class PredictionRow:
    participant_id: str
    question_order: int
    y_true: int
    y_pred: int
    fold: int

    @property
    def key(self) -> tuple[str, int]:
        return (self.participant_id, self.question_order)


@dataclass(frozen=True, eq=False)
class FoldDetail:
    fold: int
    train_participants: tuple[str, ...]
    test_participants: tuple[str, ...]
    standardizer: Standardizer
    metrics: Metrics


@dataclass(frozen=True, eq=False)
class CvResult:
    feature_set_id: FeatureSet
    spec: ClassifierSpec
    seed: int
    plan: FoldPlan
    folds: tuple[FoldDetail, ...]
    pooled: Metrics
    predictions: tuple[PredictionRow, ...]

    @property
    def fold_metrics(self) -> tuple[Metrics, ...]:
        return tuple(f.metrics for f in self.folds)

    def manifest(self) -> dict:
        return {
            "feature_set": self.feature_set_id.value,
            "classifier": self.spec.to_dict(),
            "seed": self.seed,
            "n_splits": self.plan.n_splits,
            "fold_assignments": dict(sorted(self.plan.assignments.items())),
            "n_rows": len(self.predictions),
            "pooled": self.pooled.as_dict(),
        }


def _subset(table: FeatureTable, indices: np.ndarray) -> FeatureTable:
    return FeatureTable(
        feature_set_id=table.feature_set_id,
        names=table.names,
        meta=tuple(table.meta[int(i)] for i in indices),
        values=table.values[indices],
    )


def cross_validate_table(
    table: FeatureTable,
    spec: ClassifierSpec,
    seed: int = 0,
    n_splits: int = 5,
    jobs: int = 1,
) -> CvResult:
    """Grouped CV over a prebuilt feature table.

    Per fold: standardizer and model fitted on training participants only,
    predictions made for the held-out participants. Pooled predictions are
    returned sorted by trial key and cover every row exactly once.
    """
    participants = []
    seen = set()
    for m in table.meta:
        if m.participant_id not in seen:
            seen.add(m.participant_id)
            participants.append(m.participant_id)
    plan = group_kfold(participants, n_splits=n_splits, seed=seed)

    def run_fold(fold: int) -> tuple[FoldDetail, list[PredictionRow]]:
        test_set = frozenset(plan.test_participants(fold))
        train_idx = np.array(
            [i for i, m in enumerate(table.meta) if m.participant_id not in test_set]
        )
        test_idx = np.array(
            [i for i, m in enumerate(table.meta) if m.participant_id in test_set]
        )
        train_table = _subset(table, train_idx)
        test_table = _subset(table, test_idx)
        standardizer = fit_standardizer(train_table)
        model = train(
            spec,
            apply_standardizer(standardizer, train_table),
            train_table.labels,
            seed=[seed, fold],
            jobs=1,
        )
        y_pred = model.predict(apply_standardizer(standardizer, test_table))
        rows = [
            PredictionRow(m.participant_id, m.question_order, m.label, int(p), fold)
            for m, p in zip(test_table.meta, y_pred)
        ]
        detail = FoldDetail(
            fold=fold,
            train_participants=plan.train_participants(fold),
            test_participants=plan.test_participants(fold),
            standardizer=standardizer,
            metrics=compute_metrics(test_table.labels, y_pred),
        )
        return detail, rows

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_fold, range(n_splits)))
    else:
        outcomes = [run_fold(fold) for fold in range(n_splits)]

    details = tuple(detail for detail, _ in outcomes)
    predictions = sorted(
        (row for _, rows in outcomes for row in rows), key=lambda r: r.key
    )
    if len({r.key for r in predictions}) != len(table):
        raise RuntimeError("pooled predictions do not cover each row exactly once")
    pooled = compute_metrics(
        [r.y_true for r in predictions], [r.y_pred for r in predictions]
    )
    return CvResult(
        feature_set_id=table.feature_set_id,
        spec=spec,
        seed=seed,
        plan=plan,
        folds=details,
        pooled=pooled,
        predictions=tuple(predictions),
    )


def cross_validate(
    dataset: Dataset,
    feature_set_id: FeatureSet | str,
    spec: ClassifierSpec,
    seed: int = 0,
    n_splits: int = 5,
    jobs: int = 1,
    include_session_break: bool = True,
) -> CvResult:
    table = assemble(feature_set_id, dataset, include_session_break=include_session_break)
    return cross_validate_table(table, spec, seed=seed, n_splits=n_splits, jobs=jobs)


_PREDICTION_COLUMNS = ("participant_id", "question_order", "y_true", "y_pred", "fold")


def write_predictions(rows: Sequence[PredictionRow], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(_PREDICTION_COLUMNS)
        for r in rows:
            writer.writerow([r.participant_id, r.question_order, r.y_true, r.y_pred, r.fold])
    return path


def read_predictions(path: Path | str) -> tuple[PredictionRow, ...]:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != _PREDICTION_COLUMNS:
            raise DataError(f"{path}: not a predictions CSV")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(_PREDICTION_COLUMNS):
                raise DataError(f"{path}:{lineno}: ragged row")
            try:
                rows.append(
                    PredictionRow(row[0], int(row[1]), int(row[2]), int(row[3]), int(row[4]))
                )
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return tuple(rows)
