"""Reading and writing trial datasets on disk.

A dataset directory holds one CSV per trial under ``trials/``, a
``manifest.csv`` mapping each file to its metadata, and a small
``dataset.json`` naming the signal kind. Two trial formats exist:

* oxygenation trials: 16 signal columns ``optode_1`` .. ``optode_16``, one
  row per sample at 10 Hz, empty cells for missing values;
* raw-intensity trials: 32 columns ``optode_{c}_wl730`` / ``optode_{c}_wl850``
  holding two-wavelength light intensities (input to the full preprocessing
  chain).

The manifest columns are ``file, participant_id, question_id, question_order,
session, label``. Floats are serialized with 17 significant digits so that a
write/load round trip is bit-exact.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import (
    DEFAULT_SESSION,
    Dataset,
    SessionStructure,
    TrialRecord,
    segment_of,
    validate_dataset,
)
from .errors import DataError

__all__ = [
    "RawTrialTable",
    "IntensityTrial",
    "clean_column_names",
    "impute_missing",
    "window_trial",
    "load_dataset",
    "write_dataset",
    "load_intensity_trials",
    "write_intensity_trials",
    "read_dataset_meta",
]

log = logging.getLogger(__name__)

SIGNAL_COLUMNS = tuple(f"optode_{c}" for c in range(1, 17))
MANIFEST_COLUMNS = ("file", "participant_id", "question_id", "question_order", "session", "label")

_OPTODE_RE = re.compile(r"optode[\s_]*([0-9]+)")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def clean_column_names(names: list[str]) -> list[str]:
    """Normalize header names to canonical lower-snake-case.

    Any spelling of an optode column ("Optode 3", "optode3", " OPTODE  3 ")
    becomes ``optode_3``; other columns are lower-cased with whitespace runs
    collapsed to underscores. Two inputs normalizing to the same signal
    column is an error.
    """
    cleaned: list[str] = []
    for raw in names:
        s = " ".join(str(raw).split()).lower()
        m = _OPTODE_RE.fullmatch(s)
        if m:
            cleaned.append(f"optode_{int(m.group(1))}")
        else:
            cleaned.append(s.replace(" ", "_"))
    first_seen: dict[str, str] = {}
    for raw, name in zip(names, cleaned):
        if name in first_seen and name.startswith("optode_"):
            raise DataError(
                f"ambiguous columns: {first_seen[name]!r} and {raw!r} both normalize to {name!r}"
            )
        first_seen.setdefault(name, str(raw))
    return cleaned


@dataclass
class RawTrialTable:
    """A parsed trial CSV before imputation and windowing.

    ``values`` is rows x columns with NaN marking missing cells; metadata
    comes from the manifest. All 16 optode columns must be identifiable.
    """

    column_names: list[str]
    values: np.ndarray
    participant_id: str
    question_id: str
    question_order: int
    session: int
    label: int
    channel_mask: np.ndarray = field(default_factory=lambda: np.ones(16, dtype=bool))

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.column_names):
            raise DataError(
                f"table shape {self.values.shape} inconsistent with "
                f"{len(self.column_names)} columns"
            )
        missing = [c for c in SIGNAL_COLUMNS if c not in self.column_names]
        if missing:
            raise DataError(f"missing signal columns: {', '.join(missing)}")

    @property
    def signal_indices(self) -> list[int]:
        """Column index of each optode, in channel order 1..16."""
        return [self.column_names.index(c) for c in SIGNAL_COLUMNS]


def impute_missing(table: RawTrialTable) -> RawTrialTable:
    """Fill missing signal cells with that column's within-trial mean.

    A signal column with no observed values is zero-filled and its channel
    masked out. Non-signal columns are left untouched. The per-column mean of
    observed values is preserved exactly.
    """
    values = table.values.copy()
    mask = table.channel_mask.copy()
    for ch, col in enumerate(table.signal_indices):
        x = values[:, col]
        miss = np.isnan(x)
        if not miss.any():
            continue
        if miss.all():
            values[:, col] = 0.0
            mask[ch] = False
            log.warning(
                "%s q%d: channel %d has no observed samples; masked and zero-filled",
                table.participant_id,
                table.question_order,
                ch + 1,
            )
        else:
            x[miss] = x[~miss].mean()
    return replace(table, values=values, channel_mask=mask)


def window_trial(
    table: RawTrialTable,
    n_samples: int = DEFAULT_SESSION.analysis_window_samples,
    structure: SessionStructure = DEFAULT_SESSION,
) -> TrialRecord:
    """Cut (or pad) the signal to the first ``n_samples`` rows and build a trial.

    Short trials are padded by repeating the last row, with a warning; an
    empty table is an error. Expects an imputation-complete table.
    """
    if table.values.shape[0] == 0:
        raise DataError(
            f"{table.participant_id} q{table.question_order}: trial has no sample rows"
        )
    hbo = table.values[:, table.signal_indices]
    if np.isnan(hbo).any():
        raise DataError(
            f"{table.participant_id} q{table.question_order}: "
            "signal still has missing values; impute before windowing"
        )
    n = hbo.shape[0]
    if n >= n_samples:
        hbo = hbo[:n_samples]
    else:
        log.warning(
            "%s q%d: short trial (%d rows), padding to %d by repeating the last sample",
            table.participant_id,
            table.question_order,
            n,
            n_samples,
        )
        pad = np.repeat(hbo[-1:], n_samples - n, axis=0)
        hbo = np.vstack([hbo, pad])
    return TrialRecord(
        participant_id=table.participant_id,
        session=table.session,
        segment=segment_of(table.question_order, structure),
        question_id=table.question_id,
        question_order=table.question_order,
        label=table.label,
        hbo=hbo,
        channel_mask=table.channel_mask,
    )


def _read_csv_matrix(path: Path) -> tuple[list[str], np.ndarray]:
    """Read a trial CSV into (cleaned header, float matrix with NaN holes)."""
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None:
                raise DataError(f"{path}: empty file")
            names = clean_column_names(header)
            rows: list[list[float]] = []
            for lineno, row in enumerate(reader, start=2):
                if not row or all(cell.strip() == "" for cell in row):
                    continue
                if len(row) != len(names):
                    raise DataError(
                        f"{path}:{lineno}: expected {len(names)} cells, got {len(row)}"
                    )
                parsed = []
                for name, cell in zip(names, row):
                    cell = cell.strip()
                    if cell == "":
                        parsed.append(float("nan"))
                        continue
                    try:
                        parsed.append(float(cell))
                    except ValueError as exc:
                        raise DataError(
                            f"{path}:{lineno}: bad value {cell!r} in column {name!r}"
                        ) from exc
                rows.append(parsed)
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    values = np.array(rows, dtype=float) if rows else np.empty((0, len(names)))
    return names, values


@dataclass
class _ManifestEntry:
    file: str
    participant_id: str
    question_id: str
    question_order: int
    session: int
    label: int


def _read_manifest(path: Path) -> list[_ManifestEntry]:
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    entries: list[_ManifestEntry] = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        got = tuple(reader.fieldnames or ())
        if got != MANIFEST_COLUMNS:
            raise DataError(
                f"{path}: manifest columns {got} != expected {MANIFEST_COLUMNS}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                entries.append(
                    _ManifestEntry(
                        file=row["file"],
                        participant_id=row["participant_id"],
                        question_id=row["question_id"],
                        question_order=int(row["question_order"]),
                        session=int(row["session"]),
                        label=int(row["label"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad manifest row ({exc})") from exc
    return entries


def read_dataset_meta(root: Path | str) -> dict:
    """Read ``dataset.json``; defaults to an oxygenation dataset when absent."""
    meta_path = Path(root) / "dataset.json"
    if not meta_path.is_file():
        return {"signal": "hbo", "sampling_rate_hz": DEFAULT_SESSION.sampling_rate_hz}
    with open(meta_path, encoding="utf-8") as f:
        return json.load(f)


def _check_unreferenced(root: Path, referenced: set[Path]) -> None:
    trials_dir = root / "trials"
    if not trials_dir.is_dir():
        return
    extra = sorted(p for p in trials_dir.glob("*.csv") if p.resolve() not in referenced)
    if extra:
        names = ", ".join(p.name for p in extra)
        raise DataError(f"trial files not listed in manifest: {names}")


def load_dataset(
    root: Path | str,
    manifest: Path | str | None = None,
    structure: SessionStructure = DEFAULT_SESSION,
) -> Dataset:
    """Parse every manifest-listed trial, clean/impute/window, and validate.

    Raises :class:`DataError` naming the offending file on any parse problem,
    listing unmatched files on a manifest mismatch, or carrying the validation
    report if the assembled dataset breaks an invariant.
    """
    root = Path(root)
    manifest_path = Path(manifest) if manifest else root / "manifest.csv"
    entries = _read_manifest(manifest_path)
    if not entries:
        raise DataError(f"no trials found in {manifest_path}")

    meta = read_dataset_meta(root)
    if meta.get("signal", "hbo") != "hbo":
        raise DataError(
            f"{root}: dataset holds {meta.get('signal')!r} trials; run the "
            "preprocessing chain to obtain an oxygenation dataset first"
        )

    missing = [e.file for e in entries if not (root / e.file).is_file()]
    if missing:
        raise DataError(f"manifest lists missing files: {', '.join(missing)}")
    _check_unreferenced(root, {(root / e.file).resolve() for e in entries})

    trials = []
    for e in entries:
        names, values = _read_csv_matrix(root / e.file)
        table = RawTrialTable(
            column_names=names,
            values=values,
            participant_id=e.participant_id,
            question_id=e.question_id,
            question_order=e.question_order,
            session=e.session,
            label=e.label,
        )
        trials.append(window_trial(impute_missing(table), structure=structure))

    dataset = Dataset(tuple(trials))
    report = validate_dataset(dataset, structure)
    if not report.ok:
        raise DataError(f"loaded dataset is invalid\n{report}")
    return dataset


def _trial_filename(participant_id: str, question_order: int) -> str:
    return f"{participant_id}_o{question_order:02d}.csv"


def _write_manifest(path: Path, rows: list[tuple]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_COLUMNS)
        writer.writerows(rows)


def write_dataset(dataset: Dataset, root: Path | str) -> Path:
    """Write an oxygenation dataset directory loadable by :func:`load_dataset`.

    Masked channels are written as empty cells, which the loader turns back
    into zero-filled masked channels, so write -> load is bit-exact for
    datasets in canonical form (masked channels zeroed).
    """
    root = Path(root)
    (root / "trials").mkdir(parents=True, exist_ok=True)
    manifest_rows = []
    for t in sorted(dataset.trials, key=lambda t: t.key):
        fname = _trial_filename(t.participant_id, t.question_order)
        rel = f"trials/{fname}"
        with open(root / rel, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(SIGNAL_COLUMNS)
            for row in t.hbo:
                writer.writerow(
                    [
                        _fmt(v) if t.channel_mask[c] else ""
                        for c, v in enumerate(row)
                    ]
                )
        manifest_rows.append(
            (rel, t.participant_id, t.question_id, t.question_order, t.session, t.label)
        )
    _write_manifest(root / "manifest.csv", manifest_rows)
    with open(root / "dataset.json", "w", encoding="utf-8") as f:
        json.dump({"signal": "hbo", "sampling_rate_hz": DEFAULT_SESSION.sampling_rate_hz}, f, indent=2)
        f.write("\n")
    return root


@dataclass
class IntensityTrial:
    """Two-wavelength raw light intensities for one trial, channels as columns."""

    participant_id: str
    question_id: str
    question_order: int
    session: int
    label: int
    intensity_730: np.ndarray
    intensity_850: np.ndarray

    def __post_init__(self) -> None:
        self.intensity_730 = np.asarray(self.intensity_730, dtype=float)
        self.intensity_850 = np.asarray(self.intensity_850, dtype=float)
        if self.intensity_730.shape != self.intensity_850.shape:
            raise DataError("wavelength matrices must share a shape")
        if self.intensity_730.ndim != 2 or self.intensity_730.shape[1] != 16:
            raise DataError(
                f"intensity matrix must be samples x 16, got {self.intensity_730.shape}"
            )


_INTENSITY_COLUMNS = tuple(
    f"optode_{c}_wl{wl}" for c in range(1, 17) for wl in (730, 850)
)


def write_intensity_trials(trials: list[IntensityTrial], root: Path | str) -> Path:
    """Write a raw-intensity dataset directory (input to the full chain)."""
    root = Path(root)
    (root / "trials").mkdir(parents=True, exist_ok=True)
    manifest_rows = []
    for t in sorted(trials, key=lambda t: (t.participant_id, t.question_order)):
        rel = f"trials/{_trial_filename(t.participant_id, t.question_order)}"
        with open(root / rel, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(_INTENSITY_COLUMNS)
            for i in range(t.intensity_730.shape[0]):
                row = []
                for c in range(16):
                    row.append(_fmt(t.intensity_730[i, c]))
                    row.append(_fmt(t.intensity_850[i, c]))
                writer.writerow(row)
        manifest_rows.append(
            (rel, t.participant_id, t.question_id, t.question_order, t.session, t.label)
        )
    _write_manifest(root / "manifest.csv", manifest_rows)
    with open(root / "dataset.json", "w", encoding="utf-8") as f:
        json.dump(
            {"signal": "raw_intensity", "sampling_rate_hz": DEFAULT_SESSION.sampling_rate_hz},
            f,
            indent=2,
        )
        f.write("\n")
    return root


def load_intensity_trials(root: Path | str) -> list[IntensityTrial]:
    """Load a raw-intensity dataset directory written by :func:`write_intensity_trials`."""
    root = Path(root)
    meta = read_dataset_meta(root)
    if meta.get("signal") != "raw_intensity":
        raise DataError(f"{root}: not a raw-intensity dataset (signal={meta.get('signal')!r})")
    entries = _read_manifest(root / "manifest.csv")
    if not entries:
        raise DataError(f"no trials found in {root / 'manifest.csv'}")
    missing = [e.file for e in entries if not (root / e.file).is_file()]
    if missing:
        raise DataError(f"manifest lists missing files: {', '.join(missing)}")
    _check_unreferenced(root, {(root / e.file).resolve() for e in entries})

    trials = []
    for e in entries:
        names, values = _read_csv_matrix(root / e.file)
        if tuple(names) != _INTENSITY_COLUMNS:
            raise DataError(f"{root / e.file}: unexpected intensity columns")
        if np.isnan(values).any():
            raise DataError(f"{root / e.file}: intensity files may not have missing cells")
        i730 = values[:, 0::2]
        i850 = values[:, 1::2]
        trials.append(
            IntensityTrial(
                participant_id=e.participant_id,
                question_id=e.question_id,
                question_order=e.question_order,
                session=e.session,
                label=e.label,
                intensity_730=i730,
                intensity_850=i850,
            )
        )
    return trials
