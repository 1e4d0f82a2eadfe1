"""Domain model shared by the whole pipeline.

Channel layout of the 16-optode forehead montage, session timing constants,
per-trial records of the windowed oxygenation signal, and dataset-level
validation. Everything here is immutable value data; instances are safe to
share between workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

__all__ = [
    "Region",
    "ChannelLayout",
    "SessionStructure",
    "TrialRecord",
    "Dataset",
    "Violation",
    "ValidationReport",
    "validate_dataset",
    "segment_of",
    "session_of",
    "DEFAULT_LAYOUT",
    "DEFAULT_SESSION",
    "TrialKey",
]

TrialKey = tuple[str, int]


class Region(Enum):
    """Prefrontal subregion a measurement channel belongs to."""

    LPFC = "LPFC"
    VMPFC = "VMPFC"


def _standard_regions() -> dict[int, Region]:
    return {
        ch: (Region.VMPFC if 5 <= ch <= 12 else Region.LPFC) for ch in range(1, 17)
    }


@dataclass(frozen=True)
class ChannelLayout:
    """Forehead montage: channels 1-4 and 13-16 are lateral PFC, 5-12 ventromedial.

    The region partition is fixed; constructing a layout with a different
    mapping raises.
    """

    channel_count: int = 16
    region_of: dict[int, Region] = field(default_factory=_standard_regions)

    def __post_init__(self) -> None:
        if self.channel_count != 16:
            raise ValueError(f"layout requires 16 channels, got {self.channel_count}")
        if self.region_of != _standard_regions():
            raise ValueError(
                "region map must assign channels 1-4 and 13-16 to LPFC "
                "and channels 5-12 to VMPFC"
            )

    def channels(self, region: Region) -> tuple[int, ...]:
        """1-based channel indices belonging to ``region``, ascending."""
        return tuple(ch for ch in range(1, 17) if self.region_of[ch] is region)


@dataclass(frozen=True)
class SessionStructure:
    """Timing constants of the quiz protocol.

    Two sessions of two segments each; a segment is four questions of 30 s
    plus 5 s of feedback. Only the first 200 samples (20 s at 10 Hz) of each
    question window enter the analysis.
    """

    sampling_rate_hz: float = 10.0
    question_duration_s: float = 30.0
    feedback_s: float = 5.0
    questions_per_segment: int = 4
    segments_per_session: int = 2
    sessions: int = 2
    segment_duration_s: float = 140.0
    inter_segment_rest_s: float = 20.0
    analysis_window_samples: int = 200

    def __post_init__(self) -> None:
        expected = self.questions_per_segment * (self.question_duration_s + self.feedback_s)
        if self.segment_duration_s != expected:
            raise ValueError(
                f"segment duration {self.segment_duration_s}s inconsistent with "
                f"{self.questions_per_segment} x ({self.question_duration_s}+{self.feedback_s})s"
            )
        if self.analysis_window_samples > self.question_duration_s * self.sampling_rate_hz:
            raise ValueError("analysis window longer than the question recording")

    @property
    def total_segments(self) -> int:
        return self.segments_per_session * self.sessions

    @property
    def total_questions(self) -> int:
        return self.questions_per_segment * self.total_segments

    @property
    def questions_per_session(self) -> int:
        return self.questions_per_segment * self.segments_per_session


DEFAULT_LAYOUT = ChannelLayout()
DEFAULT_SESSION = SessionStructure()


def segment_of(question_order: int, structure: SessionStructure = DEFAULT_SESSION) -> int:
    """Segment (1..4) a question belongs to, by presentation order (1..16)."""
    if not 1 <= question_order <= structure.total_questions:
        raise ValueError(
            f"question_order must be in 1..{structure.total_questions}, got {question_order}"
        )
    return math.ceil(question_order / structure.questions_per_segment)


def session_of(question_order: int, structure: SessionStructure = DEFAULT_SESSION) -> int:
    """Session (1..2) a question belongs to, by presentation order (1..16)."""
    if not 1 <= question_order <= structure.total_questions:
        raise ValueError(
            f"question_order must be in 1..{structure.total_questions}, got {question_order}"
        )
    return math.ceil(question_order / structure.questions_per_session)


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """One participant x question unit: a 200x16 oxygenation window plus metadata.

    ``hbo`` holds concentration change per sample (rows) and channel (columns);
    values are microM-scale but carried unitless. ``channel_mask`` is True for
    usable channels; masked channels carry zeros. The constructor is permissive
    about shape so that malformed trials can still be assembled and reported by
    :func:`validate_dataset`.
    """

    participant_id: str
    session: int
    segment: int
    question_id: str
    question_order: int
    label: int
    hbo: np.ndarray
    channel_mask: np.ndarray

    def __post_init__(self) -> None:
        hbo = np.array(self.hbo, dtype=float)
        mask = np.array(self.channel_mask, dtype=bool)
        hbo.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "hbo", hbo)
        object.__setattr__(self, "channel_mask", mask)

    @property
    def key(self) -> TrialKey:
        return (self.participant_id, self.question_order)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrialRecord):
            return NotImplemented
        return (
            self.participant_id == other.participant_id
            and self.session == other.session
            and self.segment == other.segment
            and self.question_id == other.question_id
            and self.question_order == other.question_order
            and self.label == other.label
            and np.array_equal(self.hbo, other.hbo)
            and np.array_equal(self.channel_mask, other.channel_mask)
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable collection of trials with derived participant bookkeeping."""

    trials: tuple[TrialRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "trials", tuple(self.trials))

    @cached_property
    def participants(self) -> tuple[str, ...]:
        """Unique participant ids in order of first appearance."""
        seen: dict[str, None] = {}
        for t in self.trials:
            seen.setdefault(t.participant_id, None)
        return tuple(seen)

    @cached_property
    def by_key(self) -> dict[TrialKey, TrialRecord]:
        return {t.key: t for t in self.trials}

    def __len__(self) -> int:
        return len(self.trials)

    def class_counts(self) -> tuple[int, int]:
        """(incorrect, correct) trial counts."""
        n1 = sum(1 for t in self.trials if t.label == 1)
        return len(self.trials) - n1, n1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.trials == other.trials


@dataclass(frozen=True)
class Violation:
    """One broken invariant: which trial (None for dataset-level), which rule, and why."""

    trial_key: TrialKey | None
    rule: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "dataset valid"
        lines = [f"{len(self.violations)} violation(s):"]
        for v in self.violations:
            where = f"{v.trial_key[0]}/q{v.trial_key[1]}" if v.trial_key else "dataset"
            lines.append(f"  [{v.rule}] {where}: {v.message}")
        return "\n".join(lines)


def validate_dataset(
    dataset: Dataset, structure: SessionStructure = DEFAULT_SESSION
) -> ValidationReport:
    """Check every trial and dataset-level invariant; report, never raise.

    Validation is pure and idempotent: it inspects the dataset and returns a
    report whose entries carry (trial key, rule id, message).
    """
    out: list[Violation] = []
    window = structure.analysis_window_samples
    seen: set[TrialKey] = set()

    for t in dataset.trials:
        key = t.key
        if t.hbo.ndim != 2 or t.hbo.shape != (window, 16):
            out.append(
                Violation(
                    key,
                    "window_shape",
                    f"window length/width {t.hbo.shape} != ({window}, 16)",
                )
            )
        elif not np.isfinite(t.hbo).all():
            out.append(Violation(key, "nonfinite", "hbo contains non-finite values"))
        if t.channel_mask.shape != (16,):
            out.append(
                Violation(key, "mask_shape", f"channel mask shape {t.channel_mask.shape} != (16,)")
            )
        if t.label not in (0, 1):
            out.append(Violation(key, "label_binary", f"label {t.label!r} not in {{0, 1}}"))
        if not 1 <= t.question_order <= structure.total_questions:
            out.append(
                Violation(
                    key,
                    "order_range",
                    f"question_order {t.question_order} outside 1..{structure.total_questions}",
                )
            )
        else:
            expected_seg = segment_of(t.question_order, structure)
            if t.segment != expected_seg:
                out.append(
                    Violation(
                        key,
                        "segment_mismatch",
                        f"segment {t.segment} != ceil(order/4) = {expected_seg}",
                    )
                )
            expected_ses = session_of(t.question_order, structure)
            if t.session != expected_ses:
                out.append(
                    Violation(
                        key,
                        "session_mismatch",
                        f"session {t.session} inconsistent with question_order {t.question_order}",
                    )
                )
        if not 1 <= t.session <= structure.sessions:
            out.append(
                Violation(key, "session_range", f"session {t.session} outside 1..{structure.sessions}")
            )
        if key in seen:
            out.append(Violation(key, "duplicate_key", "duplicate trial key"))
        seen.add(key)

    return ValidationReport(tuple(out))
