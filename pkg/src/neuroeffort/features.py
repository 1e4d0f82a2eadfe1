"""Per-trial feature extraction and feature-table assembly.

Five feature sets: per-channel means (basic, 16), per-channel temporal
statistics (st, 16x8 = 128), pairwise channel correlations (fc, 120 upper
triangle values), their concatenation (st_fc, 248), and per-participant
consecutive-question differences of st_fc (temporal, 248 wide, one fewer row
per participant).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .core import Dataset, TrialKey, TrialRecord, session_of
from .errors import DataError

__all__ = [
    "FeatureSet",
    "FeatureVector",
    "TrialMeta",
    "FeatureTable",
    "stat_features",
    "st_features",
    "fc_matrix",
    "fc_features",
    "basic_features",
    "delta_features",
    "assemble",
    "write_feature_table",
    "read_feature_table",
    "STAT_NAMES",
    "ST_NAMES",
    "FC_NAMES",
    "BASIC_NAMES",
]

log = logging.getLogger(__name__)

STAT_NAMES = ("mean", "std", "max", "min", "grad_mean", "sq_grad_mean", "skew", "kurt")
ST_NAMES = tuple(f"opt{c}_{s}" for c in range(1, 17) for s in STAT_NAMES)
FC_NAMES = tuple(
    f"fc_{i}_{j}" for i in range(1, 17) for j in range(i + 1, 17)
)
BASIC_NAMES = tuple(f"opt{c}_mean" for c in range(1, 17))


class FeatureSet(Enum):
    BASIC = "basic"
    ST = "st"
    FC = "fc"
    ST_FC = "st_fc"
    TEMPORAL = "temporal"

    @classmethod
    def coerce(cls, value: "FeatureSet | str") -> "FeatureSet":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown feature set {value!r}; expected one of "
                f"{[m.value for m in cls]}"
            ) from None


def stat_features(series: np.ndarray | list[float]) -> np.ndarray:
    """Eight summary statistics of a 1-D series, in STAT_NAMES order.

    Standard deviation uses the population (n) divisor. Skewness is
    m3 / m2^1.5 and kurtosis the non-excess m4 / m2^2 (central moments),
    evaluated on standardized residuals so tiny variances cannot underflow
    the denominator; both are 0 by convention for zero-variance input.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("stat_features requires a 1-D series of at least two samples")
    m = x.mean()
    c = x - m
    m2 = np.mean(c * c)
    if m2 > 0.0:
        u = c / np.sqrt(m2)
        skew = np.mean(u**3)
        kurt = np.mean(u**4)
    else:
        skew = kurt = 0.0
    d = np.diff(x)
    return np.array(
        [m, np.sqrt(m2), x.max(), x.min(), d.mean(), np.mean(d * d), skew, kurt]
    )


@dataclass(frozen=True)
class FeatureVector:
    """Named feature values for one trial."""

    names: tuple[str, ...]
    values: np.ndarray
    trial_key: TrialKey

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if len(self.names) != values.size:
            raise ValueError(
                f"{len(self.names)} names vs {values.size} values"
            )
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")
        if not np.isfinite(values).all():
            raise ValueError(f"non-finite feature values for trial {self.trial_key}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(self.names))


def st_features(trial: TrialRecord) -> FeatureVector:
    """128 statistics, 8 per channel; masked channels contribute zeros."""
    blocks = []
    for c in range(16):
        if trial.channel_mask[c]:
            blocks.append(stat_features(trial.hbo[:, c]))
        else:
            blocks.append(np.zeros(len(STAT_NAMES)))
    return FeatureVector(ST_NAMES, np.concatenate(blocks), trial.key)


def fc_matrix(trial: TrialRecord) -> np.ndarray:
    """16x16 Pearson correlation over the trial window.

    Symmetric with unit diagonal for valid channels; any pair involving a
    masked or zero-variance channel is 0 (including that channel's diagonal).
    """
    hbo = trial.hbo
    valid = trial.channel_mask & (hbo.var(axis=0) > 0.0)
    out = np.zeros((16, 16))
    idx = np.flatnonzero(valid)
    if idx.size >= 2:
        sub = np.clip(np.corrcoef(hbo[:, idx], rowvar=False), -1.0, 1.0)
        out[np.ix_(idx, idx)] = sub
    # BLAS products are not bitwise symmetric; mirror the upper triangle so
    # the matrix is exactly equal to its transpose
    out = np.triu(out) + np.triu(out, 1).T
    out[idx, idx] = 1.0
    return out


def fc_features(trial: TrialRecord) -> FeatureVector:
    """Row-major upper triangle of the correlation matrix, 120 values."""
    m = fc_matrix(trial)
    iu = np.triu_indices(16, k=1)
    return FeatureVector(FC_NAMES, m[iu], trial.key)


def basic_features(trial: TrialRecord) -> FeatureVector:
    """Per-channel window means, 16 values; masked channels contribute zeros."""
    means = trial.hbo.mean(axis=0)
    means = np.where(trial.channel_mask, means, 0.0)
    return FeatureVector(BASIC_NAMES, means, trial.key)


@dataclass(frozen=True)
class TrialMeta:
    """Row metadata carried alongside feature values (not features)."""

    participant_id: str
    question_order: int
    question_id: str
    session: int
    segment: int
    label: int
    channel_mask: tuple[bool, ...]

    @property
    def key(self) -> TrialKey:
        return (self.participant_id, self.question_order)

    @classmethod
    def of(cls, trial: TrialRecord) -> "TrialMeta":
        return cls(
            participant_id=trial.participant_id,
            question_order=trial.question_order,
            question_id=trial.question_id,
            session=trial.session,
            segment=trial.segment,
            label=trial.label,
            channel_mask=tuple(bool(b) for b in trial.channel_mask),
        )


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Rectangular table: one row per trial, identical names across rows."""

    feature_set_id: FeatureSet
    names: tuple[str, ...]
    meta: tuple[TrialMeta, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape != (len(self.meta), len(self.names)):
            raise ValueError(
                f"values shape {values.shape} != ({len(self.meta)}, {len(self.names)})"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "meta", tuple(self.meta))

    def __len__(self) -> int:
        return len(self.meta)

    @property
    def labels(self) -> np.ndarray:
        return np.array([m.label for m in self.meta], dtype=int)

    @property
    def participants(self) -> np.ndarray:
        return np.array([m.participant_id for m in self.meta])

    def rows(self):
        for m, v in zip(self.meta, self.values):
            yield FeatureVector(self.names, v, m.key)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureTable):
            return NotImplemented
        return (
            self.feature_set_id == other.feature_set_id
            and self.names == other.names
            and self.meta == other.meta
            and np.array_equal(self.values, other.values)
        )


_EXTRACTORS = {
    FeatureSet.BASIC: basic_features,
    FeatureSet.ST: st_features,
    FeatureSet.FC: fc_features,
}


def _sorted_trials(dataset: Dataset) -> list[TrialRecord]:
    return sorted(dataset.trials, key=lambda t: t.key)


def _per_trial_table(feature_set: FeatureSet, dataset: Dataset) -> FeatureTable:
    trials = _sorted_trials(dataset)
    if feature_set is FeatureSet.ST_FC:
        rows = [
            np.concatenate([st_features(t).values, fc_features(t).values])
            for t in trials
        ]
        names = ST_NAMES + FC_NAMES
    else:
        extract = _EXTRACTORS[feature_set]
        vectors = [extract(t) for t in trials]
        names = vectors[0].names
        rows = [v.values for v in vectors]
    return FeatureTable(
        feature_set_id=feature_set,
        names=names,
        meta=tuple(TrialMeta.of(t) for t in trials),
        values=np.vstack(rows),
    )


def delta_features(
    table: FeatureTable, include_session_break: bool = True
) -> FeatureTable:
    """Consecutive-question differences per participant, sorted by order.

    Row for question n carries Feature(Qn) - Feature(Qn-1) and the label of
    Qn; each participant's first question yields no row. With
    ``include_session_break`` False, the difference spanning the between-
    session break is dropped too. Participants with a single trial are
    skipped with a warning.
    """
    if table.feature_set_id is FeatureSet.TEMPORAL:
        raise ValueError("cannot difference an already-temporal table")
    order = sorted(range(len(table)), key=lambda i: table.meta[i].key)
    by_participant: dict[str, list[int]] = {}
    for i in order:
        by_participant.setdefault(table.meta[i].participant_id, []).append(i)

    metas: list[TrialMeta] = []
    rows: list[np.ndarray] = []
    for pid, idxs in by_participant.items():
        if len(idxs) < 2:
            log.warning("participant %s has a single trial; skipped in deltas", pid)
            continue
        for prev, cur in zip(idxs, idxs[1:]):
            m_prev, m_cur = table.meta[prev], table.meta[cur]
            if not include_session_break and session_of(m_cur.question_order) != session_of(
                m_prev.question_order
            ):
                continue
            metas.append(m_cur)
            rows.append(table.values[cur] - table.values[prev])
    if not rows:
        raise DataError("no participant has two or more trials to difference")
    return FeatureTable(
        feature_set_id=FeatureSet.TEMPORAL,
        names=table.names,
        meta=tuple(metas),
        values=np.vstack(rows),
    )


def assemble(
    feature_set: FeatureSet | str,
    dataset: Dataset,
    include_session_break: bool = True,
) -> FeatureTable:
    """Build the named feature table over a dataset (rows sorted by trial key)."""
    fs = FeatureSet.coerce(feature_set)
    if not dataset.trials:
        raise DataError("cannot extract features from an empty dataset")
    if fs is FeatureSet.TEMPORAL:
        base = _per_trial_table(FeatureSet.ST_FC, dataset)
        return delta_features(base, include_session_break=include_session_break)
    return _per_trial_table(fs, dataset)


_META_COLUMNS = (
    "feature_set",
    "participant_id",
    "question_order",
    "question_id",
    "session",
    "segment",
    "label",
    "channel_mask",
)


def write_feature_table(table: FeatureTable, path: Path | str) -> Path:
    """Serialize to CSV; floats carry 17 significant digits (exact round trip)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(_META_COLUMNS + table.names)
        for m, row in zip(table.meta, table.values):
            mask_bits = "".join("1" if b else "0" for b in m.channel_mask)
            writer.writerow(
                [
                    table.feature_set_id.value,
                    m.participant_id,
                    m.question_order,
                    m.question_id,
                    m.session,
                    m.segment,
                    m.label,
                    mask_bits,
                ]
                + [f"{v:.17g}" for v in row]
            )
    return path


def read_feature_table(path: Path | str) -> FeatureTable:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header[: len(_META_COLUMNS)]) != _META_COLUMNS:
            raise DataError(f"{path}: not a feature table CSV")
        names = tuple(header[len(_META_COLUMNS) :])
        metas: list[TrialMeta] = []
        rows: list[list[float]] = []
        fs: FeatureSet | None = None
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: ragged row")
            fs_row = FeatureSet.coerce(row[0])
            if fs is None:
                fs = fs_row
            elif fs_row is not fs:
                raise DataError(f"{path}:{lineno}: mixed feature_set values")
            metas.append(
                TrialMeta(
                    participant_id=row[1],
                    question_order=int(row[2]),
                    question_id=row[3],
                    session=int(row[4]),
                    segment=int(row[5]),
                    label=int(row[6]),
                    channel_mask=tuple(b == "1" for b in row[7]),
                )
            )
            rows.append([float(v) for v in row[len(_META_COLUMNS) :]])
    if fs is None:
        raise DataError(f"{path}: feature table has no rows")
    return FeatureTable(
        feature_set_id=fs, names=names, meta=tuple(metas), values=np.array(rows)
    )
