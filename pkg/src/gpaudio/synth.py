"""Synthetic excerpt generator.

The recordings used to develop this model family cannot be redistributed, so
experiments run on generated excerpts of matching shape: short 8 kHz signals
sampled from a known windowed quasi-periodic composite, plus iid noise.  Two
named presets mirror the reference experiment layouts:

    paper-pitch  0.7 s, three sequential bass notes (pitch estimation)
    paper-gaps   1.14 s, polyphonic, one transient gap and one decay gap

Everything is deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .gp import GPModel, TimeSeries, sample_prior
from .kernels import (
    ChangeWindow,
    CompositeKernel,
    ExpCosine,
    ExpCosineQuadratic,
    ExpQuadratic,
)
from .tasks import EventConfig, GapSpec

__all__ = [
    "SyntheticExcerpt",
    "pitch_excerpt",
    "gap_excerpt",
    "kernel_variants",
    "PRESETS",
    "make_preset",
]

# Near-step windows, as in plucked/struck note envelopes.  This steep, the
# window weight underflows to exact zero ~37 ms past the edges, so separated
# notes factorize into independent Gram blocks and second-long excerpts stay
# cheap to analyse.
_STEEPNESS = 20_000.0


@dataclass(frozen=True)
class SyntheticExcerpt:
    """A generated excerpt plus everything needed to analyse and score it."""

    data: TimeSeries                 # noisy observed signal
    clean: TimeSeries                # noiseless latent sample (held-out truth)
    kernel: CompositeKernel          # the generating composite (ECQ events)
    events: tuple[EventConfig, ...]  # pitch-task configs with references
    noise_variance: float
    gaps: GapSpec | None = None


def _sample_signal(kernel: CompositeKernel, times: np.ndarray, noise_std: float, seed):
    prior_seed, noise_seed = np.random.SeedSequence(seed).spawn(2)
    clean = sample_prior(GPModel(kernel, jitter=1e-10), times, 1, prior_seed)[0]
    noise = noise_std * np.random.default_rng(noise_seed).standard_normal(times.size)
    return clean, clean + noise


def pitch_excerpt(
    seed,
    *,
    duration: float = 0.7,
    sample_rate: int = 8000,
    fundamentals=(110.0, 146.83, 196.0),
    hz_range: tuple[float, float] | None = None,
    note_duration: float = 0.15,
    z: float = 4.0,
    envelope_l: float = 0.05,
    noise_std: float = 0.02,
    steepness: float = _STEEPNESS,
) -> SyntheticExcerpt:
    """Sequential-note excerpt for the pitch task.

    Pass hz_range to draw the fundamentals uniformly (in log frequency)
    instead of using the fixed `fundamentals` list.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    if np.isscalar(fundamentals):
        fundamentals = (float(fundamentals),)
    if hz_range is not None:
        lo, hi = hz_range
        n_events = len(fundamentals)
        fundamentals = np.exp(rng.uniform(math.log(lo), math.log(hi), size=n_events))
    fundamentals = [float(f) for f in fundamentals]
    n_events = len(fundamentals)
    if n_events < 1:
        raise ParameterError("need at least one fundamental")
    slot = duration / n_events
    if note_duration >= slot:
        raise ParameterError(
            f"note_duration {note_duration} does not fit {n_events} notes in {duration}s"
        )
    times = np.arange(round(duration * sample_rate)) / sample_rate

    windows = []
    for m in range(n_events):
        onset = slot * m + 0.5 * (slot - note_duration)
        windows.append(ChangeWindow(steepness, onset, onset + note_duration))
    specs = [
        ExpCosineQuadratic(z=z, omega=2.0 * math.pi * f, l=envelope_l)
        for f in fundamentals
    ]
    kernel = CompositeKernel(
        tuple(zip(windows, specs)), noise_variance=noise_std ** 2
    )
    clean, noisy = _sample_signal(kernel, times, noise_std, seed)
    events = tuple(
        EventConfig(
            window=w,
            kernel_family="ECQ",
            fixed_params={"z": z, "l": envelope_l},
            reference_pitch=f,
        )
        for w, f in zip(windows, fundamentals)
    )
    return SyntheticExcerpt(
        data=TimeSeries(times, noisy),
        clean=TimeSeries(times, clean),
        kernel=kernel,
        events=events,
        noise_variance=noise_std ** 2,
    )


def gap_excerpt(
    seed,
    *,
    duration: float = 1.14,
    sample_rate: int = 8000,
    low_hz_range: tuple[float, float] = (98.0, 165.0),
    high_hz_range: tuple[float, float] = (220.0, 392.0),
    z: float = 4.0,
    envelope_l: float = 0.08,
    noise_std: float = 0.02,
    steepness: float = _STEEPNESS,
    transient_gap: float = 0.045,
    decay_gap: float = 0.045,
) -> SyntheticExcerpt:
    """Polyphonic excerpt with one gap over an onset and one in a smooth decay.

    A sustained low note spans most of the excerpt; a higher note enters
    mid-way (its onset is the transient).  The first gap straddles that onset,
    the second sits late in the overlap where both envelopes evolve smoothly.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    f_low = float(np.exp(rng.uniform(*map(math.log, low_hz_range))))
    f_high = float(np.exp(rng.uniform(*map(math.log, high_hz_range))))
    times = np.arange(round(duration * sample_rate)) / sample_rate

    low_window = ChangeWindow(steepness, 0.02, duration - 0.02)
    high_onset = 0.45 * duration
    high_window = ChangeWindow(steepness, high_onset, duration - 0.02)
    kernel = CompositeKernel(
        (
            (low_window, ExpCosineQuadratic(z=z, omega=2.0 * math.pi * f_low, l=envelope_l)),
            (high_window, ExpCosineQuadratic(z=z, omega=2.0 * math.pi * f_high, l=envelope_l)),
        ),
        noise_variance=noise_std ** 2,
    )
    clean, noisy = _sample_signal(kernel, times, noise_std, seed)

    gaps = GapSpec(
        (
            (high_onset - 0.4 * transient_gap, high_onset + 0.6 * transient_gap),
            (0.78 * duration, 0.78 * duration + decay_gap),
        )
    )
    events = tuple(
        EventConfig(
            window=w,
            kernel_family="ECQ",
            fixed_params={"z": z, "l": envelope_l},
            reference_pitch=f,
        )
        for w, f in ((low_window, f_low), (high_window, f_high))
    )
    return SyntheticExcerpt(
        data=TimeSeries(times, noisy),
        clean=TimeSeries(times, clean),
        kernel=kernel,
        events=events,
        noise_variance=noise_std ** 2,
        gaps=gaps,
    )


def kernel_variants(kernel: CompositeKernel, *, eq_sigma2: float = 1.0,
                    eq_l: float = 0.001) -> dict[str, CompositeKernel]:
    """EQ/EC/ECQ composites sharing this kernel's windows and noise.

    The EC variant keeps each event's z and omega and drops the envelope; the
    EQ variant replaces each event with a smooth non-periodic kernel.  Its
    default lengthscale, a few sample periods at 8 kHz, is the scale at which
    a periodicity-blind interpolant still tracks a waveform without wild
    extrapolation overshoot at gap edges.
    """
    eq_events = []
    ec_events = []
    for w, spec in kernel.events:
        eq_events.append((w, ExpQuadratic(sigma2=eq_sigma2, l=eq_l)))
        if not isinstance(spec, (ExpCosine, ExpCosineQuadratic)):
            raise ParameterError("kernel_variants expects periodic source events")
        ec_events.append((w, ExpCosine(z=spec.z, omega=spec.omega)))
    return {
        "EQ": CompositeKernel(tuple(eq_events), kernel.noise_variance),
        "EC": CompositeKernel(tuple(ec_events), kernel.noise_variance),
        "ECQ": kernel,
    }


PRESETS = ("paper-pitch", "paper-gaps")


def make_preset(name: str, seed, **overrides) -> SyntheticExcerpt:
    """Generate a named preset; keyword overrides reach the generator.

    Note the full-size paper-gaps preset factorizes a ~9000-sample Gram
    matrix (its polyphonic voices overlap into one block), which can take a
    minute; pass e.g. duration=0.5 for quick runs.
    """
    try:
        if name == "paper-pitch":
            return pitch_excerpt(seed, **overrides)
        if name == "paper-gaps":
            return gap_excerpt(seed, **overrides)
    except TypeError as exc:
        raise ParameterError(f"bad preset override: {exc}") from exc
    raise ParameterError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
