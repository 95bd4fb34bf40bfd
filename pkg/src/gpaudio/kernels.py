"""Covariance kernels for windowed, harmonically structured audio models.

Three stationary families are provided:

    ExpQuadratic        k(tau) = sigma2 * exp(-tau^2 / (2 l^2))
    ExpCosine           k(tau) = exp(-z) * exp(z cos(omega tau))
    ExpCosineQuadratic  k(tau) = exp(-z) * exp(z cos(omega tau) - tau^2 / (2 l^2))

The cosine families carry no free variance: their amplitude is pinned to
exp(-z) so k(0) = 1 and a single shape parameter z controls both harmonic
richness and scale.  A :class:`ChangeWindow` gates a stationary process to one
sound event, and a :class:`CompositeKernel` sums M gated events:

    k_f(t, t') = sum_m phi_m(t) k_m(t - t') phi_m(t')

plus an observation-noise variance that enters only on the diagonal of the
noisy Gram matrix (in :mod:`gpaudio.gp`, never here).

Spectra are reported over ordinary frequency in Hz with the two-sided
transform S(f) = integral k(tau) exp(-2j pi f tau) dtau, evaluated
numerically on [0, f_max] (S is even, so the non-negative half carries all
information).  For the never-decaying ExpCosine family the transform uses a
fixed 64-period lag window with a Hann taper; line positions are meaningful,
absolute line magnitudes are not.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ParameterError, SelectorError

__all__ = [
    "ExpQuadratic",
    "ExpCosine",
    "ExpCosineQuadratic",
    "KernelSpec",
    "ChangeWindow",
    "CompositeKernel",
    "SpectralDensity",
    "ParamSelector",
    "eval_stationary",
    "eval_window",
    "eval_composite",
    "gram",
    "gram_gradient",
    "kernel_spectrum",
    "composite_to_dict",
    "composite_from_dict",
]

# Relative floor below which a decaying kernel is treated as vanished when
# sizing the spectrum's lag window.
_SPECTRUM_DECAY_FLOOR = 1e-8


def _require_positive(value: float, name: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ParameterError(f"{name} must be a positive finite number, got {value!r}")
    return value


@dataclass(frozen=True)
class ExpQuadratic:
    """Smooth non-periodic kernel; sigma2 is the variance, l the lengthscale (s)."""

    sigma2: float
    l: float

    type_tag = "EQ"
    param_names = ("sigma2", "l")

    def __post_init__(self):
        object.__setattr__(self, "sigma2", _require_positive(self.sigma2, "sigma2"))
        object.__setattr__(self, "l", _require_positive(self.l, "l"))


@dataclass(frozen=True)
class ExpCosine:
    """Strictly periodic harmonic kernel.

    z > 0 sets harmonic richness, omega (rad/s) the fundamental; the amplitude
    is exp(-z) so k(0) = 1.
    """

    z: float
    omega: float

    type_tag = "EC"
    param_names = ("z", "omega")

    def __post_init__(self):
        object.__setattr__(self, "z", _require_positive(self.z, "z"))
        object.__setattr__(self, "omega", _require_positive(self.omega, "omega"))


@dataclass(frozen=True)
class ExpCosineQuadratic:
    """Quasi-periodic kernel: harmonic structure with a slowly moving envelope.

    Same z/omega as :class:`ExpCosine` plus an envelope lengthscale l (s).
    """

    z: float
    omega: float
    l: float

    type_tag = "ECQ"
    param_names = ("z", "omega", "l")

    def __post_init__(self):
        object.__setattr__(self, "z", _require_positive(self.z, "z"))
        object.__setattr__(self, "omega", _require_positive(self.omega, "omega"))
        object.__setattr__(self, "l", _require_positive(self.l, "l"))


KernelSpec = Union[ExpQuadratic, ExpCosine, ExpCosineQuadratic]

_SPEC_TYPES = {cls.type_tag: cls for cls in (ExpQuadratic, ExpCosine, ExpCosineQuadratic)}


@dataclass(frozen=True)
class ChangeWindow:
    """Product of two sigmoids gating one sound event.

    varsigma (1/s) is the rise/fall steepness, alpha/beta (s) the onset and
    offset.  0 < phi(t) < 1 for all finite t, with the maximum inside
    (alpha, beta).
    """

    varsigma: float
    alpha: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "varsigma", _require_positive(self.varsigma, "varsigma"))
        alpha = float(self.alpha)
        beta = float(self.beta)
        if not (math.isfinite(alpha) and math.isfinite(beta)) or not alpha < beta:
            raise ParameterError(f"window requires finite alpha < beta, got {alpha!r}, {beta!r}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)


@dataclass(frozen=True)
class CompositeKernel:
    """Ordered (window, kernel) events plus observation-noise variance."""

    events: tuple[tuple[ChangeWindow, KernelSpec], ...]
    noise_variance: float = 0.0

    def __post_init__(self):
        events = tuple(
            pair if isinstance(pair, tuple) else tuple(pair) for pair in self.events
        )
        if not events:
            raise ParameterError("composite kernel requires at least one event")
        for pair in events:
            if len(pair) != 2:
                raise ParameterError("each event must be a (window, kernel) pair")
            w, s = pair
            if not isinstance(w, ChangeWindow):
                raise ParameterError(f"expected ChangeWindow, got {type(w).__name__}")
            if not isinstance(s, (ExpQuadratic, ExpCosine, ExpCosineQuadratic)):
                raise ParameterError(f"expected kernel spec, got {type(s).__name__}")
        object.__setattr__(self, "events", events)
        nv = float(self.noise_variance)
        if not math.isfinite(nv) or nv < 0.0:
            raise ParameterError(f"noise_variance must be finite and >= 0, got {nv!r}")
        object.__setattr__(self, "noise_variance", nv)


@dataclass(frozen=True)
class SpectralDensity:
    """Two-sided spectral density sampled on a uniform non-negative Hz grid."""

    frequencies: np.ndarray
    power: np.ndarray
    warning: str | None = None


# ---------------------------------------------------------------------------
# stationary kernels
# ---------------------------------------------------------------------------

def stationary_value(spec: KernelSpec, tau):
    """Vectorized k(tau); `tau` may be a scalar or any ndarray."""
    tau = np.asarray(tau, dtype=float)
    if isinstance(spec, ExpQuadratic):
        return spec.sigma2 * np.exp(-(tau * tau) / (2.0 * spec.l * spec.l))
    if isinstance(spec, ExpCosine):
        return np.exp(spec.z * np.cos(spec.omega * tau) - spec.z)
    return np.exp(
        spec.z * np.cos(spec.omega * tau)
        - (tau * tau) / (2.0 * spec.l * spec.l)
        - spec.z
    )


def stationary_gradient(spec: KernelSpec, name: str, tau):
    """Vectorized dk/dtheta for one scalar hyperparameter.

    For the cosine families the amplitude constraint sigma2 = exp(-z) is part
    of the parameterization, so dk/dz = k * (cos(omega tau) - 1).
    """
    tau = np.asarray(tau, dtype=float)
    if isinstance(spec, ExpQuadratic):
        if name == "sigma2":
            return np.exp(-(tau * tau) / (2.0 * spec.l * spec.l))
        if name == "l":
            return stationary_value(spec, tau) * (tau * tau) / spec.l ** 3
    else:
        if name == "z":
            return stationary_value(spec, tau) * (np.cos(spec.omega * tau) - 1.0)
        if name == "omega":
            return stationary_value(spec, tau) * (-spec.z * tau * np.sin(spec.omega * tau))
        if name == "l" and isinstance(spec, ExpCosineQuadratic):
            return stationary_value(spec, tau) * (tau * tau) / spec.l ** 3
    raise SelectorError(f"{type(spec).__name__} has no hyperparameter {name!r}")


def eval_stationary(spec: KernelSpec, tau: float) -> float:
    """k(tau) for a single lag in seconds; symmetric in tau."""
    tau = float(tau)
    if not math.isfinite(tau):
        raise ParameterError(f"lag must be finite, got {tau!r}")
    return float(stationary_value(spec, tau))


# ---------------------------------------------------------------------------
# change-windows
# ---------------------------------------------------------------------------

def window_value(w: ChangeWindow, t):
    """Vectorized phi(t) = sigmoid(vs*(t-alpha)) * sigmoid(vs*(beta-t)).

    Computed as exp(-softplus(-a) - softplus(-b)); stable for |vs * dt| far
    beyond 1e4 (it simply underflows to 0 rather than overflowing).
    """
    t = np.asarray(t, dtype=float)
    a = w.varsigma * (t - w.alpha)
    b = w.varsigma * (w.beta - t)
    return np.exp(-(np.logaddexp(0.0, -a) + np.logaddexp(0.0, -b)))


def eval_window(w: ChangeWindow, t: float) -> float:
    """phi(t) at one time; lies in (0, 1) for all finite t."""
    t = float(t)
    if not math.isfinite(t):
        raise ParameterError(f"time must be finite, got {t!r}")
    return float(window_value(w, t))


def window_support(w: ChangeWindow, times: np.ndarray) -> slice | None:
    """Index range where phi > 0 in float64 (an interval: log phi is concave).

    Outside this range phi underflows to exactly 0.0, so the event contributes
    exact zeros to any Gram matrix; callers may skip those entries unchanged.
    """
    phi = window_value(w, times)
    nz = phi > 0.0
    if not nz.any():
        return None
    lo = int(nz.argmax())
    hi = len(nz) - int(nz[::-1].argmax())
    return slice(lo, hi)


# ---------------------------------------------------------------------------
# composite kernel
# ---------------------------------------------------------------------------

def eval_composite(kernel: CompositeKernel, t: float, t_prime: float) -> float:
    """sum_m phi_m(t) k_m(t - t') phi_m(t'); excludes observation noise.

    The window product is formed before the kernel factor so swapping the
    arguments returns the identical float (multiplication commutes exactly,
    and every stationary family is even in the lag).
    """
    t = float(t)
    t_prime = float(t_prime)
    acc = 0.0
    for w, spec in kernel.events:
        acc += (eval_window(w, t) * eval_window(w, t_prime)) * eval_stationary(spec, t - t_prime)
    return acc


def _validate_grid(times: np.ndarray, name: str) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ParameterError(f"{name} must be a non-empty 1-D grid")
    if not np.isfinite(times).all():
        raise ParameterError(f"{name} contains non-finite values")
    if times.size > 1 and not (np.diff(times) > 0).all():
        raise ParameterError(f"{name} must be strictly increasing")
    return times


def gram(kernel: CompositeKernel, times_a, times_b) -> np.ndarray:
    """Gram matrix K[i, j] = eval_composite(kernel, a_i, b_j).

    Noise variance is not included.  Entries outside every event's window
    support are exact zeros and are skipped, which reproduces the elementwise
    formula bit-for-bit.  On a shared grid the upper triangle is mirrored so
    the result is exactly symmetric.
    """
    times_a = _validate_grid(times_a, "times_a")
    same = times_b is times_a
    if same:
        times_b = times_a
    else:
        times_b = _validate_grid(times_b, "times_b")
        same = times_a.shape == times_b.shape and bool(np.array_equal(times_a, times_b))
    K = np.zeros((times_a.size, times_b.size))
    for w, spec in kernel.events:
        sa = window_support(w, times_a)
        sb = sa if same else window_support(w, times_b)
        if sa is None or sb is None:
            continue
        pa = window_value(w, times_a[sa])
        pb = pa if same else window_value(w, times_b[sb])
        tau = times_a[sa, None] - times_b[None, sb]
        K[sa, sb] += (pa[:, None] * pb[None, :]) * stationary_value(spec, tau)
    if same:
        upper = np.triu(K)
        K = upper + np.triu(K, 1).T
    return K


def gram_gradient(kernel: CompositeKernel, times, selector: "ParamSelector") -> np.ndarray:
    """dK/dtheta on a shared grid for one scalar hyperparameter.

    The derivative w.r.t. noise_variance is the identity (noise sits on the
    diagonal of the noisy Gram matrix).
    """
    times = _validate_grid(times, "times")
    selector = ParamSelector.coerce(selector)
    selector.validate(kernel)
    n = times.size
    if selector.event is None:
        return np.eye(n)
    w, spec = kernel.events[selector.event]
    G = np.zeros((n, n))
    s = window_support(w, times)
    if s is None:
        return G
    phi = window_value(w, times[s])
    tau = times[s, None] - times[None, s]
    G[s, s] = (phi[:, None] * phi[None, :]) * stationary_gradient(spec, selector.name, tau)
    upper = np.triu(G)
    return upper + np.triu(G, 1).T


@dataclass(frozen=True)
class ParamSelector:
    """Names one scalar hyperparameter: an event's parameter or the noise.

    String form: ``"events[2].omega"`` or ``"noise_variance"``.
    """

    event: int | None
    name: str

    _PATTERN = re.compile(r"^events\[(\d+)\]\.([a-z0-9_]+)$")

    @classmethod
    def parse(cls, text: str) -> "ParamSelector":
        if text == "noise_variance":
            return cls(None, "noise_variance")
        m = cls._PATTERN.match(text)
        if m is None:
            raise SelectorError(
                f"cannot parse selector {text!r}; expected 'noise_variance' or 'events[<i>].<param>'"
            )
        return cls(int(m.group(1)), m.group(2))

    @classmethod
    def coerce(cls, value) -> "ParamSelector":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            return cls.parse(value)
        raise SelectorError(f"expected ParamSelector or string, got {type(value).__name__}")

    def __str__(self) -> str:
        if self.event is None:
            return "noise_variance"
        return f"events[{self.event}].{self.name}"

    def validate(self, kernel: CompositeKernel) -> None:
        if self.event is None:
            if self.name != "noise_variance":
                raise SelectorError(f"unknown model-level parameter {self.name!r}")
            return
        if not 0 <= self.event < len(kernel.events):
            raise SelectorError(
                f"event index {self.event} out of range for {len(kernel.events)} events"
            )
        spec = kernel.events[self.event][1]
        if self.name not in spec.param_names:
            raise SelectorError(
                f"event {self.event} ({spec.type_tag}) has no hyperparameter {self.name!r}"
            )

    def get(self, kernel: CompositeKernel) -> float:
        self.validate(kernel)
        if self.event is None:
            return kernel.noise_variance
        return getattr(kernel.events[self.event][1], self.name)

    def replace(self, kernel: CompositeKernel, value: float) -> CompositeKernel:
        """A copy of `kernel` with this parameter set to `value`."""
        self.validate(kernel)
        if self.event is None:
            return CompositeKernel(kernel.events, value)
        events = list(kernel.events)
        w, spec = events[self.event]
        params = {name: getattr(spec, name) for name in spec.param_names}
        params[self.name] = value
        events[self.event] = (w, type(spec)(**params))
        return CompositeKernel(tuple(events), kernel.noise_variance)


# ---------------------------------------------------------------------------
# spectral density
# ---------------------------------------------------------------------------

def _hann(tau: np.ndarray, tau_max: float) -> np.ndarray:
    return 0.5 * (1.0 + np.cos(np.pi * tau / tau_max))


def kernel_spectrum(spec: KernelSpec, f_max: float, n_points: int) -> SpectralDensity:
    """Numerical two-sided spectrum S(f) of a stationary kernel on [0, f_max].

    The lag window is sized so |k(tau_max)| < 1e-8 * k(0) for decaying kernels;
    the strictly periodic ExpCosine uses a fixed 64-period Hann-tapered window
    instead (its spectrum is a line spectrum: positions are contractual,
    absolute magnitudes are not).  Tiny negative values from truncation are
    clamped to zero.
    """
    f_max = float(f_max)
    if not math.isfinite(f_max) or f_max <= 0:
        raise ParameterError(f"f_max must be positive, got {f_max!r}")
    n_points = int(n_points)
    if n_points < 64:
        raise ParameterError(f"n_points must be at least 64, got {n_points}")

    warning = None
    taper = None
    decay_span = math.sqrt(-2.0 * math.log(_SPECTRUM_DECAY_FLOOR))
    if isinstance(spec, ExpQuadratic):
        tau_max = spec.l * decay_span
        f_content = 6.0 / (2.0 * math.pi * spec.l)
    else:
        fundamental = spec.omega / (2.0 * math.pi)
        if f_max < fundamental:
            warning = (
                f"f_max={f_max:g} Hz is below the fundamental {fundamental:g} Hz; "
                "spectral lines are not visible on the requested grid"
            )
        f_content = (spec.z + 5.0 * math.sqrt(spec.z) + 5.0) * fundamental
        if isinstance(spec, ExpCosine):
            tau_max = 64.0 * 2.0 * math.pi / spec.omega
            taper = _hann
        else:
            tau_max = spec.l * decay_span
            f_content += 6.0 / (2.0 * math.pi * spec.l)

    dtau = min(1.0 / (8.0 * max(f_max, f_content)), tau_max / 1024.0)
    tau = np.arange(0.0, tau_max, dtau)
    k = np.asarray(stationary_value(spec, tau))
    if taper is not None:
        k = k * taper(tau, tau_max)

    freqs = np.linspace(0.0, f_max, n_points)
    power = np.empty(n_points)
    # S(f) = dtau * (k(0) + 2 sum_{i>=1} k_i cos(2 pi f tau_i));  chunked so the
    # cosine matrix never exceeds a few million entries.
    chunk = max(1, int(4_000_000 // max(tau.size, 1)))
    for start in range(0, n_points, chunk):
        f_block = freqs[start : start + chunk]
        power[start : start + chunk] = 2.0 * (
            np.cos(2.0 * np.pi * np.outer(f_block, tau[1:])) @ k[1:]
        )
    power = dtau * (power + k[0])
    np.maximum(power, 0.0, out=power)
    return SpectralDensity(freqs, power, warning)


# ---------------------------------------------------------------------------
# JSON document form
# ---------------------------------------------------------------------------

def _check_keys(obj: dict, expected: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise ParameterError(f"{where} must be an object, got {type(obj).__name__}")
    got = set(obj)
    unknown = got - expected
    if unknown:
        raise ParameterError(f"{where} has unknown fields: {sorted(unknown)}")
    missing = expected - got
    if missing:
        raise ParameterError(f"{where} is missing fields: {sorted(missing)}")


def spec_to_dict(spec: KernelSpec) -> dict:
    d = {"type": spec.type_tag}
    d.update({name: getattr(spec, name) for name in spec.param_names})
    return d


def spec_from_dict(doc: dict, where: str = "kernel") -> KernelSpec:
    if not isinstance(doc, dict) or "type" not in doc:
        raise ParameterError(f"{where} must be an object with a 'type' field")
    tag = doc["type"]
    cls = _SPEC_TYPES.get(tag)
    if cls is None:
        raise ParameterError(
            f"{where}.type must be one of {sorted(_SPEC_TYPES)}, got {tag!r}"
        )
    _check_keys(doc, {"type", *cls.param_names}, where)
    return cls(**{name: doc[name] for name in cls.param_names})


def window_to_dict(w: ChangeWindow) -> dict:
    return {"varsigma": w.varsigma, "alpha": w.alpha, "beta": w.beta}


def window_from_dict(doc: dict, where: str = "window") -> ChangeWindow:
    _check_keys(doc, {"varsigma", "alpha", "beta"}, where)
    return ChangeWindow(doc["varsigma"], doc["alpha"], doc["beta"])


def composite_to_dict(kernel: CompositeKernel) -> dict:
    return {
        "noise_variance": kernel.noise_variance,
        "events": [
            {"window": window_to_dict(w), "kernel": spec_to_dict(s)}
            for w, s in kernel.events
        ],
    }


def composite_from_dict(doc: dict) -> CompositeKernel:
    _check_keys(doc, {"noise_variance", "events"}, "composite kernel")
    events_doc = doc["events"]
    if not isinstance(events_doc, list) or not events_doc:
        raise ParameterError("composite kernel 'events' must be a non-empty list")
    events = []
    for i, ev in enumerate(events_doc):
        _check_keys(ev, {"window", "kernel"}, f"events[{i}]")
        events.append(
            (
                window_from_dict(ev["window"], f"events[{i}].window"),
                spec_from_dict(ev["kernel"], f"events[{i}].kernel"),
            )
        )
    return CompositeKernel(tuple(events), doc["noise_variance"])
