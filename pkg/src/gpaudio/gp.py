"""Exact Gaussian-process inference over composite kernels.

The model is y_i = f(t_i) + e_i with f ~ GP(0, k_f) and iid Gaussian noise,
so the noisy Gram matrix is K_y = K_f + (noise_variance + jitter) I.  All
operations factorize K_y by Cholesky; explicit inverses never appear in the
solve paths.

Change-window weights underflow to exactly 0.0 in float64 far away from
their event, so K_f is exactly block-structured for steep windows: samples
split into contiguous components (merged overlapping window supports) plus a
remainder where K_f is exactly zero and only the noise diagonal survives.
Factorizing per component is algebraically identical to factorizing the full
dense matrix and is what keeps second-long audio excerpts tractable; with
gentle or overlapping windows everything collapses into a single dense block
and nothing is approximated either way.

Predictions target the latent function f: noise_variance is excluded from
the posterior variance, so callers wanting observation intervals must add it
themselves.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import NumericalError, ParameterError
from .kernels import (
    CompositeKernel,
    ParamSelector,
    gram,
    stationary_gradient,
    stationary_value,
    window_support,
    window_value,
)

__all__ = [
    "TimeSeries",
    "GPModel",
    "PosteriorPrediction",
    "InferenceSession",
    "sample_prior",
    "log_marginal_likelihood",
    "lml_gradient",
    "posterior_predict",
    "max_samples",
]

DEFAULT_MAX_SAMPLES = 16_384
_JITTER_CEILING = 1e-4
_JITTER_SEED = 1e-10  # first non-zero rung when escalating from jitter=0
_LOG_2PI = math.log(2.0 * math.pi)


def max_samples() -> int:
    """Dense-inference sample cap; override with env var GP_AUDIO_MAX_N."""
    raw = os.environ.get("GP_AUDIO_MAX_N")
    if raw is None:
        return DEFAULT_MAX_SAMPLES
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ParameterError(f"GP_AUDIO_MAX_N must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise ParameterError(f"GP_AUDIO_MAX_N must be >= 1, got {cap}")
    return cap


def _check_cap(n: int, what: str) -> None:
    cap = max_samples()
    if n > cap:
        raise ParameterError(
            f"{what} has {n} samples, above the dense-inference cap {cap}; "
            "set GP_AUDIO_MAX_N to raise it"
        )


@dataclass(frozen=True)
class TimeSeries:
    """Strictly increasing sample times (s) with aligned amplitude values."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or values.ndim != 1:
            raise ParameterError("times and values must be 1-D")
        if times.size != values.size:
            raise ParameterError(
                f"times ({times.size}) and values ({values.size}) differ in length"
            )
        if times.size == 0:
            raise ParameterError("time series must contain at least one sample")
        if not (np.isfinite(times).all() and np.isfinite(values).all()):
            raise ParameterError("time series contains non-finite entries")
        if times.size > 1 and not (np.diff(times) > 0).all():
            raise ParameterError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class GPModel:
    """A composite kernel (with its noise variance) plus a diagonal stabilizer."""

    kernel: CompositeKernel
    jitter: float = 1e-8

    def __post_init__(self):
        jitter = float(self.jitter)
        if not math.isfinite(jitter) or jitter < 0.0:
            raise ParameterError(f"jitter must be finite and >= 0, got {jitter!r}")
        object.__setattr__(self, "jitter", jitter)


@dataclass(frozen=True)
class PosteriorPrediction:
    test_times: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    covariance: np.ndarray | None = None


# ---------------------------------------------------------------------------
# block structure
# ---------------------------------------------------------------------------

@dataclass
class _Component:
    start: int
    stop: int
    events: list[int]
    _tau: np.ndarray | None = None

    def size(self) -> int:
        return self.stop - self.start

    def tau(self, times: np.ndarray) -> np.ndarray:
        if self._tau is None:
            t = times[self.start : self.stop]
            self._tau = t[:, None] - t[None, :]
        return self._tau


def _merge_components(supports: list[slice | None], n: int) -> tuple[list[_Component], np.ndarray]:
    ranges = [
        (s.start, s.stop, m) for m, s in enumerate(supports) if s is not None
    ]
    ranges.sort()
    comps: list[_Component] = []
    for lo, hi, m in ranges:
        if comps and lo < comps[-1].stop:
            comps[-1].stop = max(comps[-1].stop, hi)
            comps[-1].events.append(m)
        else:
            comps.append(_Component(lo, hi, [m]))
    covered = np.zeros(n, dtype=bool)
    for c in comps:
        covered[c.start : c.stop] = True
    return comps, ~covered


class _Factor:
    """Cholesky factorization of K_y (or K_f + jitter) in block form."""

    def __init__(self, session: "InferenceSession", kernel: CompositeKernel,
                 chols: list[np.ndarray], diag_outside: float, jitter_used: float):
        self.session = session
        self.kernel = kernel
        self.chols = chols
        self.diag_outside = diag_outside
        self.jitter_used = jitter_used
        self._inv_blocks: list[np.ndarray] | None = None

    def log_det(self) -> float:
        total = 0.0
        for L in self.chols:
            total += 2.0 * float(np.log(np.diag(L)).sum())
        n_out = self.session.n_outside
        if n_out:
            total += n_out * math.log(self.diag_outside)
        return total

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """K_y^{-1} rhs for a vector or matrix right-hand side."""
        out = np.array(rhs, dtype=float, copy=True)
        for comp, L in zip(self.session.components, self.chols):
            seg = out[comp.start : comp.stop]
            out[comp.start : comp.stop] = scipy.linalg.cho_solve(
                (L, True), seg, check_finite=False
            )
        mask = self.session.outside
        if mask.any():
            out[mask] = out[mask] / self.diag_outside
        return out

    def inv_blocks(self) -> list[np.ndarray]:
        if self._inv_blocks is None:
            blocks = []
            for L in self.chols:
                # LAPACK wants column order; handing it the C-order factor
                # would trigger a far costlier internal round trip
                inv, info = lapack.dpotri(np.asfortranarray(L), lower=1)
                if info != 0:
                    raise NumericalError(f"dpotri failed with info={info}")
                blocks.append(np.tril(inv) + np.tril(inv, -1).T)
            self._inv_blocks = blocks
        return self._inv_blocks

    def trace_inverse(self) -> float:
        total = sum(float(np.trace(b)) for b in self.inv_blocks())
        if self.session.n_outside:
            total += self.session.n_outside / self.diag_outside
        return total


class InferenceSession:
    """Reusable evaluation session for one (window layout, time grid) pair.

    Caches window weights, per-event supports, the component split, and lag
    matrices; kernels sharing the window layout can then be swapped cheaply
    (hyperparameter search).  Build it on one thread; afterwards it is
    immutable apart from internal caches and safe to share.
    """

    def __init__(self, kernel: CompositeKernel, times: np.ndarray):
        self.times = np.asarray(times, dtype=float)
        self.n = self.times.size
        self.windows = tuple(w for w, _ in kernel.events)
        self.phi = [window_value(w, self.times) for w in self.windows]
        self.supports = [window_support(w, self.times) for w in self.windows]
        self.components, self.outside = _merge_components(self.supports, self.n)
        self.n_outside = int(self.outside.sum())

    # -- Gram blocks --------------------------------------------------------

    def _event_block(self, kernel: CompositeKernel, m: int, comp: _Component) -> tuple[slice, np.ndarray]:
        """This event's contribution, as (relative slice, dense block)."""
        sup = self.supports[m]
        rel = slice(sup.start - comp.start, sup.stop - comp.start)
        tau = comp.tau(self.times)[rel, rel]
        phi = self.phi[m][sup]
        spec = kernel.events[m][1]
        block = (phi[:, None] * phi[None, :]) * stationary_value(spec, tau)
        return rel, block

    def _k_blocks(self, kernel: CompositeKernel) -> list[np.ndarray]:
        blocks = []
        for comp in self.components:
            K = np.zeros((comp.size(), comp.size()))
            for m in comp.events:
                rel, block = self._event_block(kernel, m, comp)
                K[rel, rel] += block
            blocks.append(K)
        return blocks

    # -- factorization ------------------------------------------------------

    def factor(self, kernel: CompositeKernel, jitter: float, include_noise: bool) -> _Factor:
        base = kernel.noise_variance if include_noise else 0.0
        blocks = self._k_blocks(kernel)
        ladder = [jitter]
        rung = jitter * 10.0 if jitter > 0.0 else _JITTER_SEED
        while rung <= _JITTER_CEILING * (1.0 + 1e-12):
            ladder.append(rung)
            rung *= 10.0
        failure: Exception | None = None
        for j in ladder:
            d = base + j
            if d <= 0.0 and self.n_outside:
                failure = NumericalError("zero marginal variance outside all windows")
                continue
            try:
                chols = []
                for K in blocks:
                    Kj = K.copy()
                    Kj.flat[:: K.shape[0] + 1] += d
                    chols.append(np.linalg.cholesky(Kj))
            except np.linalg.LinAlgError as exc:
                failure = exc
                continue
            return _Factor(self, kernel, chols, d, j)
        raise NumericalError(
            f"Cholesky factorization failed for every jitter rung ({failure})",
            attempted_jitter=ladder[-1],
        )

    # -- likelihood ---------------------------------------------------------

    def lml(self, kernel: CompositeKernel, values: np.ndarray, jitter: float,
            factor: _Factor | None = None) -> tuple[float, _Factor]:
        if factor is None:
            factor = self.factor(kernel, jitter, include_noise=True)
        alpha = factor.solve(values)
        quad = float(values @ alpha)
        value = -0.5 * quad - 0.5 * factor.log_det() - 0.5 * self.n * _LOG_2PI
        return value, factor

    def lml_gradient(self, kernel: CompositeKernel, values: np.ndarray,
                     selectors: list[ParamSelector], factor: _Factor) -> np.ndarray:
        alpha = factor.solve(values)
        grad = np.empty(len(selectors))
        for j, sel in enumerate(selectors):
            if sel.event is None:
                # dK_y/d(noise) = I
                grad[j] = 0.5 * float(alpha @ alpha) - 0.5 * factor.trace_inverse()
                continue
            m = sel.event
            sup = self.supports[m]
            if sup is None:
                grad[j] = 0.0
                continue
            comp_idx = next(
                i for i, c in enumerate(self.components) if m in c.events
            )
            comp = self.components[comp_idx]
            rel = slice(sup.start - comp.start, sup.stop - comp.start)
            tau = comp.tau(self.times)[rel, rel]
            phi = self.phi[m][sup]
            spec = kernel.events[m][1]
            G = (phi[:, None] * phi[None, :]) * stationary_gradient(spec, sel.name, tau)
            a = alpha[sup]
            kinv = factor.inv_blocks()[comp_idx][rel, rel]
            grad[j] = 0.5 * float(a @ G @ a) - 0.5 * float((kinv * G).sum())
        return grad

    # -- prediction ---------------------------------------------------------

    def cross_gram(self, kernel: CompositeKernel, test_times: np.ndarray) -> np.ndarray:
        """K[test, train]; exact zeros outside every event's supports."""
        K = np.zeros((test_times.size, self.n))
        for m, (w, spec) in enumerate(kernel.events):
            sup = self.supports[m]
            if sup is None:
                continue
            tsup = window_support(w, test_times)
            if tsup is None:
                continue
            pt = window_value(w, test_times[tsup])
            tau = test_times[tsup, None] - self.times[None, sup]
            K[tsup, sup] += (pt[:, None] * self.phi[m][sup][None, :]) * stationary_value(spec, tau)
        return K

    def predict(self, kernel: CompositeKernel, values: np.ndarray, jitter: float,
                test_times: np.ndarray, want_full_cov: bool) -> PosteriorPrediction:
        factor = self.factor(kernel, jitter, include_noise=True)
        alpha = factor.solve(values)
        K_cross = self.cross_gram(kernel, test_times)
        mean = K_cross @ alpha

        if want_full_cov:
            cov = gram(kernel, test_times, test_times)
            for comp, L in zip(self.components, factor.chols):
                W = scipy.linalg.solve_triangular(
                    L, K_cross[:, comp.start : comp.stop].T, lower=True,
                    check_finite=False,
                )
                cov -= W.T @ W
            variance = np.diag(cov).copy()
            variance = _clamp_variance(variance)
            cov[np.diag_indices_from(cov)] = variance
            return PosteriorPrediction(test_times, mean, variance, cov)

        prior_diag = np.zeros(test_times.size)
        for m, (w, spec) in enumerate(kernel.events):
            pt = window_value(w, test_times)
            prior_diag += pt * pt * float(stationary_value(spec, 0.0))
        explained = np.zeros(test_times.size)
        for comp, L in zip(self.components, factor.chols):
            W = scipy.linalg.solve_triangular(
                L, K_cross[:, comp.start : comp.stop].T, lower=True,
                check_finite=False,
            )
            explained += (W * W).sum(axis=0)
        variance = _clamp_variance(prior_diag - explained)
        return PosteriorPrediction(test_times, mean, variance, None)

    # -- sampling -----------------------------------------------------------

    def sample(self, kernel: CompositeKernel, jitter: float, n_samples: int, seed) -> np.ndarray:
        factor = self.factor(kernel, jitter, include_noise=False)
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((self.n, n_samples))
        out = np.zeros_like(z)
        for comp, L in zip(self.components, factor.chols):
            out[comp.start : comp.stop] = L @ z[comp.start : comp.stop]
        if self.n_outside:
            out[self.outside] = math.sqrt(factor.diag_outside) * z[self.outside]
        return out.T


def _clamp_variance(variance: np.ndarray) -> np.ndarray:
    low = variance.min() if variance.size else 0.0
    if low < -1e-10:
        raise NumericalError(
            f"posterior variance {low:.3e} is more negative than round-off allows"
        )
    return np.maximum(variance, 0.0)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def sample_prior(model: GPModel, times, n_samples: int, seed) -> np.ndarray:
    """Draw latent-function samples from N(0, K_f + jitter I).

    Returns an (n_samples, len(times)) array; deterministic given `seed`.
    Observation noise is not added (these are samples of f, not y).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ParameterError("times must be a non-empty 1-D grid")
    if times.size > 1 and not (np.diff(times) > 0).all():
        raise ParameterError("times must be strictly increasing")
    if int(n_samples) < 1:
        raise ParameterError(f"n_samples must be >= 1, got {n_samples}")
    _check_cap(times.size, "sampling grid")
    session = InferenceSession(model.kernel, times)
    return session.sample(model.kernel, model.jitter, int(n_samples), seed)


def log_marginal_likelihood(model: GPModel, data: TimeSeries) -> float:
    """log N(y | 0, K_f + (noise_variance + jitter) I), via Cholesky."""
    _check_cap(len(data), "training data")
    session = InferenceSession(model.kernel, data.times)
    value, _ = session.lml(model.kernel, data.values, model.jitter)
    return value


def lml_gradient(model: GPModel, data: TimeSeries, free_params) -> np.ndarray:
    """Gradient of the log marginal likelihood, ordered like `free_params`.

    Each component is 0.5 a^T (dK/dtheta) a - 0.5 tr(K_y^{-1} dK/dtheta)
    with a = K_y^{-1} y.
    """
    selectors = [ParamSelector.coerce(p) for p in free_params]
    if not selectors:
        raise ParameterError("free_params must not be empty")
    for sel in selectors:
        sel.validate(model.kernel)
    _check_cap(len(data), "training data")
    session = InferenceSession(model.kernel, data.times)
    factor = session.factor(model.kernel, model.jitter, include_noise=True)
    return session.lml_gradient(model.kernel, data.values, selectors, factor)


def posterior_predict(model: GPModel, data: TimeSeries, test_times,
                      want_full_cov: bool = False) -> PosteriorPrediction:
    """Posterior of the latent f at `test_times` given noisy observations.

    mean = K_*f K_y^{-1} y, cov = K_** - K_*f K_y^{-1} K_*f^T; solved via
    Cholesky.  noise_variance is excluded from the predictive variance.
    """
    test_times = np.asarray(test_times, dtype=float)
    if test_times.ndim != 1 or test_times.size == 0:
        raise ParameterError("test_times must be a non-empty 1-D grid")
    if test_times.size > 1 and not (np.diff(test_times) > 0).all():
        raise ParameterError("test_times must be strictly increasing")
    _check_cap(len(data), "training data")
    _check_cap(test_times.size, "test grid")
    session = InferenceSession(model.kernel, data.times)
    return session.predict(model.kernel, data.values, model.jitter, test_times, want_full_cov)
