"""Synthetic dataset generator with known ground truth.

Each trial plants a hemodynamic activation of class-dependent amplitude on
every channel, then adds linear drift, cardiac and respiratory sinusoids,
and white noise. Class 1 trials get double the class 0 amplitude and
lateral channels get a region contrast multiplier, so statistic and
connectivity features both carry recoverable signal. With
``emit="raw_intensity"`` the concentrations are additionally pushed through
the two-wavelength forward model so the full preprocessing chain can be
exercised end to end.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import gamma as _gamma

from .core import (
    DEFAULT_LAYOUT,
    DEFAULT_SESSION,
    Dataset,
    Region,
    SessionStructure,
    TrialKey,
    TrialRecord,
    segment_of,
    session_of,
    validate_dataset,
)
from .errors import DataError
from .ingest import IntensityTrial, write_dataset, write_intensity_trials
from .preprocess import MbllParams, mbll_forward

__all__ = [
    "SynthSpec",
    "GroundTruth",
    "SynthResult",
    "hrf",
    "activation_waveform",
    "generate",
    "DEFAULT_LABEL_RATE",
]

DEFAULT_LABEL_RATE = 168.0 / 256.0
_BASELINE_INTENSITY = (1000.0, 1000.0)


def _hrf_raw(t: np.ndarray) -> np.ndarray:
    # difference of gamma densities: main lobe peaks at 6 s (mode of the
    # shape-7 density), the subtracted lobe dips the tail near 16 s
    return _gamma.pdf(t, a=7.0, scale=1.0) - _gamma.pdf(t, a=17.0, scale=1.0) / 6.0


_HRF_PEAK = float(np.max(_hrf_raw(np.arange(0.0, 30.0, 0.001))))


def hrf(t: float | np.ndarray) -> float | np.ndarray:
    """Hemodynamic impulse response, unit peak, zero at t=0, dip near 16 s."""
    arr = np.asarray(t, dtype=float)
    out = _hrf_raw(arr) / _HRF_PEAK
    return float(out) if out.ndim == 0 else out


def activation_waveform(structure: SessionStructure = DEFAULT_SESSION) -> np.ndarray:
    """Question-long activation convolved with the impulse response.

    A boxcar spanning the question's active period is convolved with the
    sampled impulse response, truncated to the analysis window, and scaled
    to unit peak inside that window.
    """
    fs = structure.sampling_rate_hz
    active = np.ones(int(round(structure.question_duration_s * fs)))
    kernel = hrf(np.arange(0.0, 30.0, 1.0 / fs))
    conv = np.convolve(active, kernel) / fs
    window = conv[: structure.analysis_window_samples]
    return window / window.max()


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters; amplitudes are on the microM scale."""

    n_participants: int = 16
    questions: int = 16
    effect_size: float = 1.0
    noise_sd: float = 0.5
    drift_slope_range: float = 0.02
    cardiac_hz: float = 1.1
    cardiac_amp: float = 0.3
    respiration_hz: float = 0.3
    respiration_amp: float = 0.3
    label_rate: float = DEFAULT_LABEL_RATE
    region_contrast: float = 1.5
    seed: int = 0
    emit: str = "hbo"

    def __post_init__(self) -> None:
        if self.n_participants < 1:
            raise ValueError("need at least one participant")
        if self.questions != DEFAULT_SESSION.total_questions:
            raise ValueError(
                f"questions must equal {DEFAULT_SESSION.total_questions} "
                "(the fixed session plan)"
            )
        for name in (
            "effect_size",
            "noise_sd",
            "drift_slope_range",
            "cardiac_amp",
            "respiration_amp",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 < self.label_rate < 1.0:
            raise ValueError("label_rate must lie strictly between 0 and 1")
        nyquist = DEFAULT_SESSION.sampling_rate_hz / 2.0
        for name in ("cardiac_hz", "respiration_hz"):
            if not 0.0 < getattr(self, name) < nyquist:
                raise ValueError(f"{name} must lie in (0, {nyquist}) Hz")
        if self.region_contrast <= 0:
            raise ValueError("region_contrast must be positive")
        if self.emit not in ("hbo", "raw_intensity"):
            raise ValueError("emit must be 'hbo' or 'raw_intensity'")

    @classmethod
    def high_snr(cls, seed: int = 0, emit: str = "hbo") -> "SynthSpec":
        """Strong planted effect over mild nuisance terms (learnability runs)."""
        return cls(
            effect_size=3.0,
            noise_sd=0.2,
            drift_slope_range=0.01,
            cardiac_amp=0.2,
            respiration_amp=0.2,
            seed=seed,
            emit=emit,
        )

    def to_dict(self) -> dict:
        return {
            "n_participants": self.n_participants,
            "questions": self.questions,
            "effect_size": self.effect_size,
            "noise_sd": self.noise_sd,
            "drift_slope_range": self.drift_slope_range,
            "cardiac_hz": self.cardiac_hz,
            "cardiac_amp": self.cardiac_amp,
            "respiration_hz": self.respiration_hz,
            "respiration_amp": self.respiration_amp,
            "label_rate": self.label_rate,
            "region_contrast": self.region_contrast,
            "seed": self.seed,
            "emit": self.emit,
        }


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """What the generator planted, per trial in dataset key order."""

    keys: tuple[TrialKey, ...]
    labels: np.ndarray
    amplitudes: np.ndarray
    waveform: np.ndarray

    def __post_init__(self) -> None:
        for attr in ("labels", "amplitudes", "waveform"):
            arr = np.asarray(getattr(self, attr))
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        n = len(self.keys)
        if self.labels.shape != (n,) or self.amplitudes.shape != (n, 16):
            raise ValueError("ground truth arrays do not match the key count")

    def clean_hbo(self, index: int) -> np.ndarray:
        """Planted noise-free concentration matrix for one trial."""
        return np.outer(self.waveform, self.amplitudes[index])


@dataclass(frozen=True, eq=False)
class SynthResult:
    spec: SynthSpec
    dataset: Dataset
    truth: GroundTruth
    intensity: tuple[IntensityTrial, ...] | None

    def write(self, root: Path | str) -> Path:
        """Write the emitted artifact as a loadable dataset directory."""
        if self.spec.emit == "raw_intensity":
            assert self.intensity is not None
            return write_intensity_trials(list(self.intensity), root)
        return write_dataset(self.dataset, root)


def _draw_labels(spec: SynthSpec, n_trials: int) -> np.ndarray:
    # exact count closest to label_rate, shuffled, so the class split is
    # reproducible arithmetic rather than a binomial draw
    n_ones = int(round(spec.label_rate * n_trials))
    n_ones = min(max(n_ones, 1), n_trials - 1)
    labels = np.zeros(n_trials, dtype=int)
    labels[:n_ones] = 1
    np.random.default_rng([spec.seed, 0]).shuffle(labels)
    return labels


def generate(spec: SynthSpec) -> SynthResult:
    """Build a dataset (and optionally intensities) with recorded ground truth."""
    structure = DEFAULT_SESSION
    n_samples = structure.analysis_window_samples
    n_trials = spec.n_participants * spec.questions
    labels = _draw_labels(spec, n_trials)
    waveform = activation_waveform(structure)
    t = np.arange(n_samples) / structure.sampling_rate_hz
    lpfc = np.array(
        [ch in DEFAULT_LAYOUT.channels(Region.LPFC) for ch in range(1, 17)]
    )
    region_factor = np.where(lpfc, spec.region_contrast, 1.0)
    params = MbllParams.from_constants() if spec.emit == "raw_intensity" else None

    keys: list[TrialKey] = []
    amplitudes = np.empty((n_trials, 16))
    trials: list[TrialRecord] = []
    intensity: list[IntensityTrial] = []
    index = 0
    for p in range(1, spec.n_participants + 1):
        pid = f"p{p:02d}"
        for order in range(1, spec.questions + 1):
            label = int(labels[index])
            amp = spec.effect_size * (1.0 if label == 1 else 0.5) * region_factor
            rng = np.random.default_rng([spec.seed, 1, index])
            slopes = rng.uniform(-spec.drift_slope_range, spec.drift_slope_range, 16)
            cardiac_phase = rng.uniform(0.0, 2.0 * np.pi, 16)
            respiration_phase = rng.uniform(0.0, 2.0 * np.pi, 16)
            noise = rng.normal(0.0, spec.noise_sd, (n_samples, 16))
            hbo = (
                np.outer(waveform, amp)
                + np.outer(t, slopes)
                + spec.cardiac_amp
                * np.sin(2.0 * np.pi * spec.cardiac_hz * t[:, None] + cardiac_phase)
                + spec.respiration_amp
                * np.sin(2.0 * np.pi * spec.respiration_hz * t[:, None] + respiration_phase)
                + noise
            )
            trial = TrialRecord(
                participant_id=pid,
                session=session_of(order, structure),
                segment=segment_of(order, structure),
                question_id=f"q{order:02d}",
                question_order=order,
                label=label,
                hbo=hbo,
                channel_mask=np.ones(16, dtype=bool),
            )
            trials.append(trial)
            keys.append(trial.key)
            amplitudes[index] = amp
            if spec.emit == "raw_intensity":
                assert params is not None
                hbr = -0.3 * hbo
                i730 = np.empty_like(hbo)
                i850 = np.empty_like(hbo)
                for c in range(16):
                    i730[:, c], i850[:, c] = mbll_forward(
                        hbo[:, c], hbr[:, c], params, _BASELINE_INTENSITY
                    )
                intensity.append(
                    IntensityTrial(
                        participant_id=pid,
                        question_id=f"q{order:02d}",
                        question_order=order,
                        session=session_of(order, structure),
                        label=label,
                        intensity_730=i730,
                        intensity_850=i850,
                    )
                )
            index += 1

    dataset = Dataset(tuple(trials))
    report = validate_dataset(dataset, structure)
    if not report.ok:
        raise DataError(f"generator produced an invalid dataset\n{report}")
    truth = GroundTruth(
        keys=tuple(keys),
        labels=labels,
        amplitudes=amplitudes,
        waveform=waveform,
    )
    return SynthResult(
        spec=spec,
        dataset=dataset,
        truth=truth,
        intensity=tuple(intensity) if spec.emit == "raw_intensity" else None,
    )
