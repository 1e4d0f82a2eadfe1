"""Signal chain from raw light intensity to analysis-ready oxygenation.

Fixed order for raw-intensity input: low-pass FIR filtering of the
intensities, conversion to concentration changes via the modified
Beer-Lambert relation, then linear detrending of the concentrations.
Oxygenation input skips straight to detrending and channel rejection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .core import DEFAULT_SESSION, Dataset, TrialRecord, validate_dataset
from .errors import DataError
from .ingest import IntensityTrial

__all__ = [
    "FilterTaps",
    "MbllParams",
    "design_lowpass_fir",
    "apply_filter",
    "magnitude_response",
    "mbll_convert",
    "mbll_forward",
    "detrend_linear",
    "reject_channels",
    "apply_mask",
    "preprocess_intensity_trial",
    "preprocess_hbo_trial",
    "preprocess_dataset",
    "DEFAULT_VARIANCE_FLOOR",
    "DEFAULT_SATURATION_CEILING",
    "DEFAULT_BASELINE_SAMPLES",
]

DEFAULT_VARIANCE_FLOOR = 1e-8
DEFAULT_SATURATION_CEILING = 50.0
DEFAULT_BASELINE_SAMPLES = 20  # first 2 s at 10 Hz
_SATURATION_FRACTION = 0.05

# Concentrations are carried in microM while extinction coefficients are
# specified per mM, hence this factor inside the Beer-Lambert conversions.
_UM_PER_MM = 1000.0


@dataclass(frozen=True)
class FilterTaps:
    """Coefficients of a linear-phase FIR low-pass filter (order+1 taps)."""

    coefficients: tuple[float, ...]
    nominal_cutoff_hz: float
    sampling_rate_hz: float

    def __post_init__(self) -> None:
        h = np.asarray(self.coefficients, dtype=float)
        if h.ndim != 1 or h.size < 3 or h.size % 2 == 0:
            raise ValueError("tap count must be odd (even filter order)")
        if not np.allclose(h, h[::-1], rtol=0.0, atol=1e-12):
            raise ValueError("taps must be symmetric (linear phase)")
        if abs(h.sum() - 1.0) > 1e-9:
            raise ValueError(f"taps must have unit DC gain, sum = {h.sum()!r}")
        object.__setattr__(self, "coefficients", tuple(float(v) for v in h))

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=float)


def design_lowpass_fir(
    order: int = 20,
    cutoff_hz: float = 0.1,
    fs_hz: float = DEFAULT_SESSION.sampling_rate_hz,
) -> FilterTaps:
    """Windowed-sinc low-pass design with a Hamming window, unit DC gain."""
    if order <= 0 or order % 2 != 0:
        raise ValueError(f"filter order must be positive and even, got {order}")
    if not 0.0 < cutoff_hz < fs_hz / 2.0:
        raise ValueError(
            f"cutoff {cutoff_hz} Hz must lie in (0, Nyquist = {fs_hz / 2.0} Hz)"
        )
    m = order // 2
    n = np.arange(order + 1) - m
    ideal = 2.0 * cutoff_hz / fs_hz * np.sinc(2.0 * cutoff_hz / fs_hz * n)
    window = 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(order + 1) / order)
    taps = ideal * window
    taps /= taps.sum()
    return FilterTaps(tuple(taps), nominal_cutoff_hz=cutoff_hz, sampling_rate_hz=fs_hz)


def magnitude_response(taps: FilterTaps, freqs_hz: np.ndarray | list[float]) -> np.ndarray:
    """|H(f)| of the taps, from the discrete-time Fourier transform."""
    h = taps.as_array()
    f = np.atleast_1d(np.asarray(freqs_hz, dtype=float))
    k = np.arange(h.size)
    phases = np.exp(-2j * np.pi * np.outer(f / taps.sampling_rate_hz, k))
    return np.abs(phases @ h)


def apply_filter(series: np.ndarray | list[float], taps: FilterTaps) -> np.ndarray:
    """Causal convolution with reflection at the edges; output length == input.

    The group delay (order/2 samples) is left in the output; only the start-up
    transient is softened by the reflected extension.
    """
    x = np.asarray(series, dtype=float)
    h = taps.as_array()
    if x.ndim != 1:
        raise ValueError("apply_filter expects a 1-D series")
    if x.size < h.size:
        raise ValueError(f"series of {x.size} samples shorter than {h.size} taps")
    p = taps.order
    ext = np.pad(x, p, mode="reflect")
    full = np.convolve(ext, h)
    return full[p : p + x.size]


def _load_constants(path: Path | None = None) -> dict:
    if path is None:
        text = resources.files("neuroeffort.data").joinpath("mbll_constants.json").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class MbllParams:
    """Geometry and extinction constants for the Beer-Lambert conversion.

    ``extinction`` rows are wavelengths (730 nm then 850 nm), columns are
    chromophores (HbO then HbR), in 1/(mM*cm).
    """

    source_detector_distance_cm: float = 2.5
    differential_pathlength_factor: float = 6.0
    extinction: tuple[tuple[float, float], tuple[float, float]] = (
        (0.39, 1.1022),
        (1.058, 0.69132),
    )

    def __post_init__(self) -> None:
        e = np.asarray(self.extinction, dtype=float)
        if e.shape != (2, 2):
            raise ValueError("extinction must be a 2x2 matrix")
        if abs(np.linalg.det(e)) < 1e-12:
            raise ValueError("extinction matrix is singular; wavelengths not separable")
        if self.source_detector_distance_cm <= 0 or self.differential_pathlength_factor <= 0:
            raise ValueError("distance and pathlength factor must be positive")
        object.__setattr__(
            self, "extinction", tuple(tuple(float(v) for v in row) for row in e)
        )

    @property
    def pathlength_cm(self) -> float:
        return self.source_detector_distance_cm * self.differential_pathlength_factor

    def extinction_matrix(self) -> np.ndarray:
        return np.asarray(self.extinction, dtype=float)

    @classmethod
    def from_constants(cls, path: Path | None = None) -> "MbllParams":
        """Build from the packaged constants table, or a user override file."""
        c = _load_constants(path)
        ext = c["extinction_1_per_mM_cm"]
        return cls(
            source_detector_distance_cm=float(c["source_detector_distance_cm"]),
            differential_pathlength_factor=float(c["differential_pathlength_factor"]),
            extinction=(
                (float(ext["hbo"][0]), float(ext["hbr"][0])),
                (float(ext["hbo"][1]), float(ext["hbr"][1])),
            ),
        )


def mbll_convert(
    intensity_730: np.ndarray | list[float],
    intensity_850: np.ndarray | list[float],
    baseline_window: slice | tuple[int, int],
    params: MbllParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Two-wavelength intensities to (delta HbO, delta HbR) in microM.

    Optical density change per wavelength is -log10(I(t) / mean baseline I);
    the 2x2 extinction system is solved per sample. Delta HbR is returned for
    completeness but unused downstream.
    """
    i730 = np.asarray(intensity_730, dtype=float)
    i850 = np.asarray(intensity_850, dtype=float)
    if i730.shape != i850.shape or i730.ndim != 1:
        raise ValueError("wavelength series must be 1-D and equally long")
    if (i730 <= 0).any() or (i850 <= 0).any():
        raise DataError("light intensities must be strictly positive")
    if isinstance(baseline_window, tuple):
        baseline_window = slice(*baseline_window)
    base730 = i730[baseline_window]
    base850 = i850[baseline_window]
    if base730.size == 0:
        raise ValueError("baseline window is empty")
    dod = np.stack(
        [-np.log10(i730 / base730.mean()), -np.log10(i850 / base850.mean())]
    )  # (2, n)
    conc_mm = np.linalg.solve(params.extinction_matrix(), dod) / params.pathlength_cm
    conc_um = conc_mm * _UM_PER_MM
    return conc_um[0], conc_um[1]


def mbll_forward(
    delta_hbo: np.ndarray | list[float],
    delta_hbr: np.ndarray | list[float],
    params: MbllParams,
    baseline_intensity: tuple[float, float] = (1000.0, 1000.0),
) -> tuple[np.ndarray, np.ndarray]:
    """Forward model: concentrations (microM) to two-wavelength intensities.

    Exact inverse of :func:`mbll_convert` when the convert-side baseline window
    covers samples whose concentrations are zero.
    """
    hbo = np.asarray(delta_hbo, dtype=float)
    hbr = np.asarray(delta_hbr, dtype=float)
    if hbo.shape != hbr.shape or hbo.ndim != 1:
        raise ValueError("concentration series must be 1-D and equally long")
    conc_mm = np.stack([hbo, hbr]) / _UM_PER_MM
    dod = params.extinction_matrix() @ conc_mm * params.pathlength_cm
    i0 = np.asarray(baseline_intensity, dtype=float)
    if (i0 <= 0).any():
        raise ValueError("baseline intensities must be positive")
    return i0[0] * 10.0 ** (-dod[0]), i0[1] * 10.0 ** (-dod[1])


def detrend_linear(series: np.ndarray | list[float]) -> np.ndarray:
    """Subtract the least-squares line; residual has zero mean and zero slope."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("detrend requires a 1-D series of at least two samples")
    t = np.arange(x.size, dtype=float)
    return x - np.polyval(np.polyfit(t, x, 1), t)


def _detrend_columns(matrix: np.ndarray) -> np.ndarray:
    n = matrix.shape[0]
    t = np.arange(n, dtype=float)
    design = np.column_stack([t, np.ones(n)])
    coef, *_ = np.linalg.lstsq(design, matrix, rcond=None)
    return matrix - design @ coef


def reject_channels(
    trial: TrialRecord,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
    saturation_ceiling: float = DEFAULT_SATURATION_CEILING,
) -> np.ndarray:
    """Quality mask: False for flat (variance below floor) or saturated channels.

    A channel is saturated when more than 5% of samples exceed the ceiling in
    absolute value. The trial's existing mask is kept for already-bad channels.
    """
    mask = trial.channel_mask.copy()
    for c in range(trial.hbo.shape[1]):
        if not mask[c]:
            continue
        x = trial.hbo[:, c]
        if x.var() < variance_floor:
            mask[c] = False
        elif np.mean(np.abs(x) > saturation_ceiling) > _SATURATION_FRACTION:
            mask[c] = False
    return mask


def apply_mask(trial: TrialRecord, mask: np.ndarray) -> TrialRecord:
    """Store a mask on the trial, zeroing masked channels (canonical form)."""
    mask = np.asarray(mask, dtype=bool)
    hbo = trial.hbo.copy()
    hbo[:, ~mask] = 0.0
    return replace(trial, hbo=hbo, channel_mask=mask)


def preprocess_hbo_trial(
    trial: TrialRecord,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
    saturation_ceiling: float = DEFAULT_SATURATION_CEILING,
) -> TrialRecord:
    """Oxygenation input: detrend each channel, then reject bad channels."""
    detrended = replace(trial, hbo=_detrend_columns(trial.hbo))
    mask = reject_channels(detrended, variance_floor, saturation_ceiling)
    return apply_mask(detrended, mask)


def preprocess_intensity_trial(
    trial: IntensityTrial,
    taps: FilterTaps | None = None,
    params: MbllParams | None = None,
    baseline_samples: int = DEFAULT_BASELINE_SAMPLES,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
    saturation_ceiling: float = DEFAULT_SATURATION_CEILING,
    n_samples: int = DEFAULT_SESSION.analysis_window_samples,
) -> TrialRecord:
    """Full chain on a raw-intensity trial: filter, Beer-Lambert, detrend, reject."""
    if taps is None:
        taps = design_lowpass_fir()
    if params is None:
        params = MbllParams.from_constants()
    n_rows = trial.intensity_730.shape[0]
    if n_rows < len(taps.coefficients):
        raise DataError(
            f"{trial.participant_id} q{trial.question_order}: "
            f"{n_rows} samples is shorter than the filter"
        )
    hbo_cols = []
    for c in range(16):
        f730 = apply_filter(trial.intensity_730[:, c], taps)
        f850 = apply_filter(trial.intensity_850[:, c], taps)
        hbo, _hbr = mbll_convert(f730, f850, slice(0, baseline_samples), params)
        hbo_cols.append(hbo)
    hbo = np.column_stack(hbo_cols)
    if hbo.shape[0] >= n_samples:
        hbo = hbo[:n_samples]
    else:
        hbo = np.vstack([hbo, np.repeat(hbo[-1:], n_samples - hbo.shape[0], axis=0)])
    from .core import segment_of  # local to avoid import cycle at module load

    record = TrialRecord(
        participant_id=trial.participant_id,
        session=trial.session,
        segment=segment_of(trial.question_order),
        question_id=trial.question_id,
        question_order=trial.question_order,
        label=trial.label,
        hbo=_detrend_columns(hbo),
        channel_mask=np.ones(16, dtype=bool),
    )
    mask = reject_channels(record, variance_floor, saturation_ceiling)
    return apply_mask(record, mask)


def preprocess_dataset(
    data: Dataset | list[IntensityTrial],
    taps: FilterTaps | None = None,
    params: MbllParams | None = None,
    baseline_samples: int = DEFAULT_BASELINE_SAMPLES,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
    saturation_ceiling: float = DEFAULT_SATURATION_CEILING,
) -> Dataset:
    """Run the applicable chain over a whole dataset and validate the result."""
    if isinstance(data, Dataset):
        trials = [
            preprocess_hbo_trial(t, variance_floor, saturation_ceiling)
            for t in data.trials
        ]
    else:
        trials = [
            preprocess_intensity_trial(
                t, taps, params, baseline_samples, variance_floor, saturation_ceiling
            )
            for t in data
        ]
    out = Dataset(tuple(trials))
    report = validate_dataset(out)
    if not report.ok:
        raise DataError(f"preprocessing produced an invalid dataset\n{report}")
    return out
