"""Analysis tasks: per-event pitch estimation and missing-data gap filling.

Pitch estimation knows every kernel parameter except each event's fundamental
frequency: a candidate-grid initialization per event is followed by one joint
gradient refinement of all the omegas on the full observed signal.  Results
are reported in Hz and MIDI semitones (A4 = 440 Hz = 69).

Gap filling takes a fully specified composite kernel (no fitting): training
samples are those outside every gap, the test grid is the original sample
times inside each gap, and accuracy is the RMS of the posterior mean against
held-out truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import AlignmentError, ParameterError
from .gp import GPModel, PosteriorPrediction, TimeSeries, posterior_predict
from .kernels import (
    ChangeWindow,
    CompositeKernel,
    ParamSelector,
    _SPEC_TYPES,
)
from .optimize import FitResult, OptimConfig, fit, frequency_grid_init, semitone_ladder

__all__ = [
    "EventConfig",
    "PitchEstimate",
    "PitchResult",
    "GapSpec",
    "GapFill",
    "GapFillResult",
    "estimate_pitch",
    "fill_gaps",
    "hz_to_midi",
]


def hz_to_midi(f: float) -> float:
    """MIDI note number of a frequency: 69 + 12 log2(f / 440)."""
    f = float(f)
    if not math.isfinite(f) or f <= 0:
        raise ParameterError(f"frequency must be positive, got {f!r}")
    return 69.0 + 12.0 * math.log2(f / 440.0)


@dataclass(frozen=True)
class EventConfig:
    """One sound event for the pitch task: window, kernel family, known params."""

    window: ChangeWindow
    kernel_family: str
    fixed_params: dict
    reference_pitch: float | None = None

    def __post_init__(self):
        cls = _SPEC_TYPES.get(self.kernel_family)
        if cls is None:
            raise ParameterError(
                f"kernel_family must be one of {sorted(_SPEC_TYPES)}, got {self.kernel_family!r}"
            )
        unknown = set(self.fixed_params) - set(cls.param_names)
        if unknown:
            raise ParameterError(
                f"fixed_params {sorted(unknown)} are not hyperparameters of {self.kernel_family}"
            )
        if self.reference_pitch is not None and not self.reference_pitch > 0:
            raise ParameterError(
                f"reference_pitch must be positive, got {self.reference_pitch!r}"
            )
        object.__setattr__(self, "fixed_params", dict(self.fixed_params))


@dataclass(frozen=True)
class PitchEstimate:
    omega: float
    frequency: float
    midi: float
    reference_hz: float | None = None
    error_semitones: float | None = None


@dataclass(frozen=True)
class PitchResult:
    events: tuple[PitchEstimate, ...]
    rms_semitones: float | None
    fit: FitResult


def estimate_pitch(
    data: TimeSeries,
    events: list[EventConfig],
    noise_variance: float,
    optim: OptimConfig,
    candidates=None,
    jitter: float = 1e-8,
) -> PitchResult:
    """Estimate each event's fundamental frequency.

    Per event, `frequency_grid_init` scans the candidate grid (default: a
    semitone-spaced ladder from 27.5 Hz to a quarter of the sample rate's
    Nyquist); the winners seed one joint gradient refinement in which only the
    omegas are free, trained on all observed samples.  `optim.free_params` is
    ignored; the task owns the selector list.  When every event carries a
    reference pitch the result includes the RMS error in semitones.
    """
    if not events:
        raise ParameterError("events must not be empty")
    for i, ev in enumerate(events):
        if not isinstance(ev, EventConfig):
            raise ParameterError(f"events[{i}] is not an EventConfig")
        if "omega" not in _SPEC_TYPES[ev.kernel_family].param_names:
            raise ParameterError(
                f"events[{i}] uses {ev.kernel_family}, which has no fundamental-frequency "
                "parameter; the pitch task supports EC and ECQ only"
            )
        if "omega" in ev.fixed_params:
            raise ParameterError(
                f"events[{i}] fixes omega, but omega is the quantity being estimated"
            )
        missing = (set(_SPEC_TYPES[ev.kernel_family].param_names) - {"omega"}) - set(ev.fixed_params)
        if missing:
            raise ParameterError(
                f"events[{i}] ({ev.kernel_family}) is missing fixed_params {sorted(missing)}"
            )

    nyquist = 0.5 / float(np.median(np.diff(data.times)))
    if candidates is None:
        candidates = semitone_ladder(27.5, nyquist / 4.0)

    init_hz = []
    for ev in events:
        def scan(grid, ev=ev):
            return frequency_grid_init(
                data,
                ev.window,
                grid,
                kernel_family=ev.kernel_family,
                fixed_params=ev.fixed_params,
                noise_variance=noise_variance,
                jitter=jitter,
            )

        coarse = scan(candidates)
        # the evidence in omega is multimodal at sub-semitone scale for long
        # notes, so a local 0.1-semitone pass puts the joint refinement
        # safely inside the basin of the coarse winner
        local = [
            hz
            for k in range(-5, 6)
            if 0.0 < (hz := coarse * 2.0 ** (k / 120.0)) < nyquist
        ]
        init_hz.append(scan(local))

    kernel = CompositeKernel(
        tuple(
            (
                ev.window,
                _SPEC_TYPES[ev.kernel_family](
                    omega=2.0 * math.pi * hz, **ev.fixed_params
                ),
            )
            for ev, hz in zip(events, init_hz)
        ),
        noise_variance,
    )
    config = replace(
        optim,
        free_params=tuple(ParamSelector(m, "omega") for m in range(len(events))),
    )
    result = fit(GPModel(kernel, jitter), data, config)

    estimates = []
    errors = []
    for m, ev in enumerate(events):
        omega = result.model.kernel.events[m][1].omega
        freq = omega / (2.0 * math.pi)
        midi = hz_to_midi(freq)
        if ev.reference_pitch is not None:
            err = midi - hz_to_midi(ev.reference_pitch)
            errors.append(err)
            estimates.append(PitchEstimate(omega, freq, midi, ev.reference_pitch, err))
        else:
            estimates.append(PitchEstimate(omega, freq, midi))
    rms = None
    if len(errors) == len(events):
        rms = float(np.sqrt(np.mean(np.square(errors))))
    return PitchResult(tuple(estimates), rms, result)


# ---------------------------------------------------------------------------
# gap filling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GapSpec:
    """Disjoint, sorted [start, end) intervals of deliberately missing data."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        intervals = tuple((float(a), float(b)) for a, b in self.intervals)
        if not intervals:
            raise ParameterError("gap spec requires at least one interval")
        for a, b in intervals:
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise ParameterError(f"gap interval [{a!r}, {b!r}) is not a valid range")
        for (a0, b0), (a1, b1) in zip(intervals, intervals[1:]):
            if a1 < b0:
                raise ParameterError("gap intervals must be sorted and non-overlapping")
        object.__setattr__(self, "intervals", intervals)

    def mask(self, times: np.ndarray) -> np.ndarray:
        """Boolean mask of samples falling inside any interval."""
        inside = np.zeros(times.size, dtype=bool)
        for a, b in self.intervals:
            inside |= (times >= a) & (times < b)
        return inside


@dataclass(frozen=True)
class GapFill:
    start: float
    end: float
    prediction: PosteriorPrediction
    rms: float | None = None


@dataclass(frozen=True)
class GapFillResult:
    gaps: tuple[GapFill, ...]


def fill_gaps(
    data: TimeSeries,
    gaps: GapSpec,
    kernel: CompositeKernel,
    truth: TimeSeries | None = None,
    jitter: float = 1e-8,
) -> GapFillResult:
    """Predict the signal inside each gap from the samples outside all gaps.

    `data` supplies the sample grid; values inside gaps are never read, so
    they may hold anything.  When `truth` is given, its times must contain
    every in-gap sample time exactly and each gap is scored by the RMS of
    (posterior mean - truth).
    """
    t0, t1 = data.times[0], data.times[-1]
    for a, b in gaps.intervals:
        if a < t0 or b > t1:
            raise ParameterError(
                f"gap [{a}, {b}) lies outside the data span [{t0}, {t1}]"
            )
    inside = gaps.mask(data.times)
    if inside.all():
        raise ParameterError("every sample falls inside a gap; training set is empty")
    if not inside.any():
        raise ParameterError("no sample falls inside any gap; nothing to predict")

    train = TimeSeries(data.times[~inside], data.values[~inside])
    test_times = data.times[inside]
    prediction = posterior_predict(GPModel(kernel, jitter), train, test_times)

    fills = []
    for a, b in gaps.intervals:
        sel = (test_times >= a) & (test_times < b)
        if not sel.any():
            raise ParameterError(f"gap [{a}, {b}) contains no sample times")
        sub = PosteriorPrediction(
            test_times[sel], prediction.mean[sel], prediction.variance[sel]
        )
        rms = None
        if truth is not None:
            truth_values = _aligned_truth(truth, test_times[sel], (a, b))
            rms = float(np.sqrt(np.mean(np.square(sub.mean - truth_values))))
        fills.append(GapFill(a, b, sub, rms))
    return GapFillResult(tuple(fills))


def _aligned_truth(truth: TimeSeries, gap_times: np.ndarray, interval) -> np.ndarray:
    idx = np.searchsorted(truth.times, gap_times)
    if not (idx < truth.times.size).all() or not np.array_equal(truth.times[idx], gap_times):
        raise AlignmentError(
            f"truth series does not contain the sample times of gap [{interval[0]}, {interval[1]})"
        )
    return truth.values[idx]
