"""Effort and efficiency scores per participant-segment.

Pipeline: collapse trials into per-segment summaries (answer score plus mean
oxygenation change), z-score both across the comparison group, rotate the
(effort, performance) plane by 45 degrees into efficiency (rne) and
involvement (rni) axes, and classify each point into one of four quadrant
states. ``compare`` quantifies agreement between points built from actual
labels and points built from model predictions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import DEFAULT_SESSION, Dataset, SessionStructure, TrialKey
from .errors import DataError

__all__ = [
    "EPSILON",
    "HBO_CLAMP",
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
    "write_effort_csv",
    "read_effort_csv",
    "write_agreement",
]

EPSILON = 0.001
HBO_CLAMP = 1e-6
_SQRT2 = math.sqrt(2.0)


class EffortMode(Enum):
    RECIPROCAL = "reciprocal"
    NEGATION = "negation"

    @classmethod
    def coerce(cls, value: "EffortMode | str") -> "EffortMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown effort mode {value!r}; expected one of "
                f"{[m.value for m in cls]}"
            ) from None


class QuadrantState(Enum):
    HE_HI = "HE_HI"
    HE_LI = "HE_LI"
    LE_HI = "LE_HI"
    LE_LI = "LE_LI"


@dataclass(frozen=True)
class SegmentSummary:
    """One participant-segment: answer score and mean oxygenation change."""

    participant_id: str
    segment: int
    score: int
    mean_hbo: float

    @property
    def key(self) -> tuple[str, int]:
        return (self.participant_id, self.segment)


@dataclass(frozen=True)
class EffortPoint:
    """A segment's standardized coordinates on the efficiency plane."""

    participant_id: str
    segment: int
    score: int
    mean_hbo: float
    p_z: float
    ce_z: float
    rne: float
    rni: float
    state: QuadrantState

    @property
    def key(self) -> tuple[str, int]:
        return (self.participant_id, self.segment)


@dataclass(frozen=True)
class AgreementReport:
    mae_rne: float
    mae_rni: float
    pearson_rne: float
    pearson_rni: float
    quadrant_matches: int
    quadrant_total: int

    def __post_init__(self) -> None:
        if self.quadrant_matches > self.quadrant_total:
            raise ValueError("quadrant matches exceed total")

    def as_dict(self) -> dict:
        return {
            "mae_rne": self.mae_rne,
            "mae_rni": self.mae_rni,
            "pearson_rne": self.pearson_rne,
            "pearson_rni": self.pearson_rni,
            "quadrant_matches": self.quadrant_matches,
            "quadrant_total": self.quadrant_total,
        }

    def __str__(self) -> str:
        return (
            f"rne: MAE {self.mae_rne:.4f}, Pearson {self.pearson_rne:.4f}\n"
            f"rni: MAE {self.mae_rni:.4f}, Pearson {self.pearson_rni:.4f}\n"
            f"quadrant states matched: {self.quadrant_matches}/{self.quadrant_total}"
        )


def summarize_segments(
    dataset: Dataset,
    predicted: Mapping[TrialKey, int] | None = None,
    structure: SessionStructure = DEFAULT_SESSION,
) -> list[SegmentSummary]:
    """One summary per (participant, segment), sorted by that key.

    The score sums trial labels over the segment's questions; with a
    ``predicted`` map (trial key to 0/1) predictions replace actual labels.
    mean_hbo averages every sample of every unmasked channel across the
    segment's trials (0 if the whole segment is masked out).
    """
    if not dataset.trials:
        raise DataError("cannot summarize an empty dataset")
    per_segment: dict[tuple[str, int], list] = {}
    for trial in dataset.trials:
        per_segment.setdefault((trial.participant_id, trial.segment), []).append(trial)

    expected = structure.questions_per_segment
    summaries = []
    for (pid, segment), trials in sorted(per_segment.items()):
        if len(trials) != expected:
            raise DataError(
                f"participant {pid} segment {segment} has {len(trials)} trials, "
                f"expected {expected}"
            )
        score = 0
        for t in trials:
            if predicted is None:
                score += t.label
            else:
                if t.key not in predicted:
                    raise DataError(
                        f"predictions missing trial {t.participant_id} "
                        f"order {t.question_order}"
                    )
                score += int(predicted[t.key])
        total = 0.0
        count = 0
        for t in trials:
            unmasked = t.hbo[:, t.channel_mask]
            total += float(unmasked.sum())
            count += unmasked.size
        summaries.append(
            SegmentSummary(
                participant_id=pid,
                segment=segment,
                score=score,
                mean_hbo=total / count if count else 0.0,
            )
        )
    return summaries


def performance_z(
    scores: Sequence[float] | np.ndarray, eps: float = EPSILON
) -> np.ndarray:
    """Group z-score of answer scores with eps added to the denominator."""
    x = np.asarray(scores, dtype=float)
    if x.size == 0:
        raise DataError("cannot standardize an empty score group")
    return (x - x.mean()) / (x.std() + eps)


def effort_z(
    mean_hbos: Sequence[float] | np.ndarray,
    mode: EffortMode | str = EffortMode.RECIPROCAL,
    eps: float = EPSILON,
    clamp: float = HBO_CLAMP,
) -> np.ndarray:
    """Standardized effort from mean oxygenation changes.

    Reciprocal mode (default): (1/x_i - 1/GM) / (1/SD + eps) with GM and SD
    the group mean and population standard deviation of the raw values;
    |x_i| is clamped below by ``clamp`` before taking reciprocals. Negation
    mode: -(x_i - GM) / (SD + eps), a plain sign-flipped z-score for inputs
    whose group mean sits near zero (detrended signals).
    """
    mode = EffortMode.coerce(mode)
    x = np.asarray(mean_hbos, dtype=float)
    if x.size == 0:
        raise DataError("cannot standardize an empty effort group")
    if mode is EffortMode.NEGATION:
        return -(x - x.mean()) / (x.std() + eps)
    clamped = np.where(np.abs(x) < clamp, np.where(x < 0, -clamp, clamp), x)
    gm = clamped.mean()
    sd = clamped.std()
    if gm == 0.0 or sd == 0.0:
        raise DataError(
            "reciprocal effort standardization is undefined for this group "
            f"(mean {gm}, sd {sd}); use negation mode for zero-centered signals"
        )
    return (1.0 / clamped - 1.0 / gm) / (1.0 / sd + eps)


def rne_rni(p_z, ce_z):
    """Rotate (performance, effort) by 45 degrees into (rne, rni)."""
    p = np.asarray(p_z, dtype=float)
    c = np.asarray(ce_z, dtype=float)
    if not (np.isfinite(p).all() and np.isfinite(c).all()):
        raise ValueError("rotation requires finite inputs")
    rne = (p - c) / _SQRT2
    rni = (p + c) / _SQRT2
    if p.ndim == 0:
        return float(rne), float(rni)
    return rne, rni


def classify_state(rne: float, rni: float) -> QuadrantState:
    """Quadrant of a point; exact zeros classify as the low state."""
    if not (math.isfinite(rne) and math.isfinite(rni)):
        raise ValueError("state classification requires finite inputs")
    efficiency = "HE" if rne > 0 else "LE"
    involvement = "HI" if rni > 0 else "LI"
    return QuadrantState(f"{efficiency}_{involvement}")


def effort_points(
    summaries: Sequence[SegmentSummary],
    mode: EffortMode | str = EffortMode.RECIPROCAL,
    eps: float = EPSILON,
    group_by: str = "all",
) -> list[EffortPoint]:
    """Standardize summaries and place them on the efficiency plane.

    ``group_by="all"`` (default) computes GM/SD once over every summary;
    ``group_by="segment"`` standardizes within each segment index across
    participants.
    """
    if group_by not in ("all", "segment"):
        raise ValueError(f"group_by must be 'all' or 'segment', got {group_by!r}")
    if not summaries:
        raise DataError("no summaries to standardize")
    summaries = list(summaries)
    p_z = np.empty(len(summaries))
    ce_z = np.empty(len(summaries))
    if group_by == "all":
        groups = [list(range(len(summaries)))]
    else:
        by_segment: dict[int, list[int]] = {}
        for i, s in enumerate(summaries):
            by_segment.setdefault(s.segment, []).append(i)
        groups = [by_segment[k] for k in sorted(by_segment)]
    for idx in groups:
        p_z[idx] = performance_z([summaries[i].score for i in idx], eps)
        ce_z[idx] = effort_z([summaries[i].mean_hbo for i in idx], mode, eps)
    points = []
    for s, p, c in zip(summaries, p_z, ce_z):
        rne, rni = rne_rni(p, c)
        points.append(
            EffortPoint(
                participant_id=s.participant_id,
                segment=s.segment,
                score=s.score,
                mean_hbo=s.mean_hbo,
                p_z=float(p),
                ce_z=float(c),
                rne=rne,
                rni=rni,
                state=classify_state(rne, rni),
            )
        )
    return points


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    if a.size < 2 or a.std() == 0.0 or b.std() == 0.0:
        # degenerate: no spread on one side; call it perfect only when equal
        return 1.0 if np.array_equal(a, b) else 0.0
    return float(np.corrcoef(a, b)[0, 1])


def compare(
    actual: Sequence[EffortPoint], predicted: Sequence[EffortPoint]
) -> AgreementReport:
    """Agreement between matched actual and predicted points."""
    a_by_key = {p.key: p for p in actual}
    p_by_key = {p.key: p for p in predicted}
    if len(a_by_key) != len(actual) or len(p_by_key) != len(predicted):
        raise DataError("duplicate (participant, segment) keys")
    if a_by_key.keys() != p_by_key.keys():
        only_a = sorted(a_by_key.keys() - p_by_key.keys())
        only_p = sorted(p_by_key.keys() - a_by_key.keys())
        raise DataError(
            f"key mismatch; only in actual: {only_a}; only in predicted: {only_p}"
        )
    keys = sorted(a_by_key)
    a_rne = np.array([a_by_key[k].rne for k in keys])
    p_rne = np.array([p_by_key[k].rne for k in keys])
    a_rni = np.array([a_by_key[k].rni for k in keys])
    p_rni = np.array([p_by_key[k].rni for k in keys])
    matches = sum(a_by_key[k].state is p_by_key[k].state for k in keys)
    return AgreementReport(
        mae_rne=float(np.abs(a_rne - p_rne).mean()),
        mae_rni=float(np.abs(a_rni - p_rni).mean()),
        pearson_rne=_pearson(a_rne, p_rne),
        pearson_rni=_pearson(a_rni, p_rni),
        quadrant_matches=int(matches),
        quadrant_total=len(keys),
    )


_EFFORT_COLUMNS = (
    "participant_id",
    "segment",
    "score",
    "mean_hbo",
    "p_z",
    "ce_z",
    "rne",
    "rni",
    "state",
)


def write_effort_csv(points: Sequence[EffortPoint], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(_EFFORT_COLUMNS)
        for p in points:
            writer.writerow(
                [
                    p.participant_id,
                    p.segment,
                    p.score,
                    f"{p.mean_hbo:.17g}",
                    f"{p.p_z:.17g}",
                    f"{p.ce_z:.17g}",
                    f"{p.rne:.17g}",
                    f"{p.rni:.17g}",
                    p.state.value,
                ]
            )
    return path


def read_effort_csv(path: Path | str) -> list[EffortPoint]:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != _EFFORT_COLUMNS:
            raise DataError(f"{path}: not an effort CSV")
        points = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(_EFFORT_COLUMNS):
                raise DataError(f"{path}:{lineno}: ragged row")
            try:
                points.append(
                    EffortPoint(
                        participant_id=row[0],
                        segment=int(row[1]),
                        score=int(row[2]),
                        mean_hbo=float(row[3]),
                        p_z=float(row[4]),
                        ce_z=float(row[5]),
                        rne=float(row[6]),
                        rni=float(row[7]),
                        state=QuadrantState(row[8]),
                    )
                )
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return points


def write_agreement(report: AgreementReport, path: Path | str) -> Path:
    """Write the agreement report as CSV alongside a readable .txt twin."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        d = report.as_dict()
        writer.writerow(d.keys())
        writer.writerow(
            [f"{v:.17g}" if isinstance(v, float) else v for v in d.values()]
        )
    with open(path.with_suffix(".txt"), "w", encoding="utf-8") as f:
        f.write(str(report) + "\n")
    return path
