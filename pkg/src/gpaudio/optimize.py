"""Empirical-Bayes hyperparameter learning.

Gradient ascent on the log marginal likelihood over a chosen set of scalar
hyperparameters.  Every optimizable parameter is positive (z, omega, l,
sigma2, noise_variance), so the search runs in log-parameter space where
unconstrained steps cannot leave the domain; the chain rule contributes a
factor theta to each gradient component.

Steps use a backtracking line search (halve until the objective does not
decrease, at most 30 halvings) and the best iterate seen is returned, so the
reported optimum never falls below the starting point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyWindowError, NumericalError, ParameterError
from .gp import GPModel, InferenceSession, TimeSeries, _check_cap
from .kernels import (
    ChangeWindow,
    CompositeKernel,
    ParamSelector,
    _SPEC_TYPES,
    window_value,
)

__all__ = [
    "OptimConfig",
    "FitResult",
    "fit",
    "frequency_grid_init",
    "semitone_ladder",
]

_IMPROVEMENT_TOL = 1e-9
_STALL_LIMIT = 5
_MAX_HALVINGS = 30
_RESTART_SPREAD = 0.25  # log-space std of restart perturbations
# A gradient step never moves any parameter by more than 5% per iteration.
# Cliff-like gradients near sharp evidence peaks would otherwise propose
# omegas around e^100, where float64 cos() argument reduction is meaningless
# and the Gram matrix turns to noise; they also waste most of the 30
# permitted halvings walking an absurd first trial back down.
_MAX_LOG_STEP = 0.05


@dataclass(frozen=True)
class OptimConfig:
    """Settings for `fit`.

    free_params may be left empty when the config only carries settings (a
    task fills the selectors in); `fit` itself requires at least one.
    """

    free_params: tuple = ()
    max_iters: int = 500
    step_size: float = 0.01
    grad_tol: float = 1e-5
    restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "free_params",
            tuple(ParamSelector.coerce(p) for p in self.free_params),
        )
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.step_size > 0:
            raise ParameterError(f"step_size must be > 0, got {self.step_size}")
        if not self.grad_tol > 0:
            raise ParameterError(f"grad_tol must be > 0, got {self.grad_tol}")
        if self.restarts < 1:
            raise ParameterError(f"restarts must be >= 1, got {self.restarts}")


@dataclass(frozen=True)
class FitResult:
    model: GPModel
    final_lml: float
    iterations: int
    converged: bool
    trace: tuple  # per-iteration (lml, grad_inf_norm), starting point included


def fit(model: GPModel, data: TimeSeries, config: OptimConfig) -> FitResult:
    """Maximize the log marginal likelihood over config.free_params.

    Deterministic given config.seed.  Parameters outside free_params are
    carried into the result bit-identically.
    """
    selectors = list(config.free_params)
    if not selectors:
        raise ParameterError("free_params must not be empty")
    for sel in selectors:
        sel.validate(model.kernel)
    _check_cap(len(data), "training data")

    theta0 = np.array([sel.get(model.kernel) for sel in selectors])
    if not (theta0 > 0).all():
        bad = selectors[int(np.argmin(theta0 > 0))]
        raise ParameterError(
            f"cannot optimize {bad} from a non-positive value "
            f"{theta0.min()!r}; log-space reparameterization requires > 0"
        )
    x0 = np.log(theta0)

    session = InferenceSession(model.kernel, data.times)
    rng = np.random.default_rng(config.seed)

    best: tuple | None = None
    for restart in range(config.restarts):
        start = x0 if restart == 0 else x0 + _RESTART_SPREAD * rng.standard_normal(x0.size)
        outcome = _ascend(session, model, data.values, selectors, start, config)
        if best is None or outcome[0] > best[0]:
            best = outcome

    best_lml, best_x, iterations, converged, trace = best
    kernel = _kernel_at(model.kernel, selectors, best_x)
    return FitResult(
        model=GPModel(kernel, model.jitter),
        final_lml=best_lml,
        iterations=iterations,
        converged=converged,
        trace=tuple(trace),
    )


def _kernel_at(base: CompositeKernel, selectors, x: np.ndarray) -> CompositeKernel:
    kernel = base
    for sel, value in zip(selectors, np.exp(x)):
        kernel = sel.replace(kernel, float(value))
    return kernel


def _ascend(session, model, values, selectors, x0, config):
    def evaluate(x):
        kernel = _kernel_at(model.kernel, selectors, x)
        try:
            lml, factor = session.lml(kernel, values, model.jitter)
        except NumericalError as exc:
            exc.iterate = {str(s): float(v) for s, v in zip(selectors, np.exp(x))}
            raise
        return kernel, lml, factor

    def log_gradient(kernel, factor, x):
        g_nat = session.lml_gradient(kernel, values, selectors, factor)
        return np.exp(x) * g_nat

    x = np.asarray(x0, dtype=float).copy()
    kernel, lml, factor = evaluate(x)
    if not math.isfinite(lml):
        raise ParameterError(
            f"log marginal likelihood is {lml!r} at the initial point; invalid start"
        )
    grad = log_gradient(kernel, factor, x)
    trace = [(lml, float(np.abs(grad).max()))]
    best_lml, best_x = lml, x.copy()
    step = config.step_size
    stall = 0
    iterations = 0
    converged = False

    for _ in range(config.max_iters):
        grad_norm = np.abs(grad).max()
        if grad_norm < config.grad_tol:
            converged = True
            break
        iterations += 1
        s = min(step, _MAX_LOG_STEP / grad_norm)
        accepted = False
        for _ in range(_MAX_HALVINGS + 1):
            candidate = x + s * grad
            kernel_new, lml_new, factor_new = evaluate(candidate)
            if math.isfinite(lml_new) and lml_new >= lml:
                accepted = True
                break
            s *= 0.5
        if accepted:
            improvement = lml_new - lml
            x, kernel, lml, factor = candidate, kernel_new, lml_new, factor_new
            step = min(s * 2.0, 10.0)
            if lml > best_lml:
                best_lml, best_x = lml, x.copy()
            grad = log_gradient(kernel, factor, x)
        else:
            improvement = 0.0
            step = s
        trace.append((lml, float(np.abs(grad).max())))
        stall = stall + 1 if improvement < _IMPROVEMENT_TOL else 0
        if stall >= _STALL_LIMIT:
            converged = True
            break

    return best_lml, best_x, iterations, converged, trace


# ---------------------------------------------------------------------------
# frequency initialization
# ---------------------------------------------------------------------------

def semitone_ladder(low_hz: float, high_hz: float) -> list[float]:
    """Geometric candidate grid at 12 steps per octave, inclusive of low_hz."""
    if not 0 < low_hz < high_hz:
        raise ParameterError(f"need 0 < low_hz < high_hz, got {low_hz}, {high_hz}")
    count = int(math.floor(12.0 * math.log2(high_hz / low_hz))) + 1
    return [low_hz * 2.0 ** (k / 12.0) for k in range(count)]


def frequency_grid_init(
    data: TimeSeries,
    window: ChangeWindow,
    candidates,
    *,
    kernel_family: str,
    fixed_params: dict,
    noise_variance: float,
    jitter: float = 1e-8,
) -> float:
    """Pick the fundamental-frequency candidate with the highest evidence.

    Evaluates the log marginal likelihood of a single-event model (this
    window, this kernel family, omega = 2*pi*candidate) restricted to the
    samples where the window weight exceeds 0.5, and returns the argmax
    candidate in Hz.  Ties break toward the lowest frequency.
    """
    candidates = [float(c) for c in candidates]
    if not candidates:
        raise ParameterError("candidates must not be empty")
    if len(data) < 2:
        raise ParameterError("grid initialization needs at least two samples")
    nyquist = 0.5 / float(np.median(np.diff(data.times)))
    for c in candidates:
        if not 0.0 < c < nyquist:
            raise ParameterError(
                f"candidate {c!r} Hz outside (0, {nyquist:g}) for this sample rate"
            )
    cls = _SPEC_TYPES.get(kernel_family)
    if cls is None or "omega" not in cls.param_names:
        raise ParameterError(
            f"kernel_family must name a periodic family with an omega parameter, got {kernel_family!r}"
        )
    expected = set(cls.param_names) - {"omega"}
    if set(fixed_params) != expected:
        raise ParameterError(
            f"fixed_params for {kernel_family} must supply exactly {sorted(expected)}, "
            f"got {sorted(fixed_params)}"
        )

    mask = window_value(window, data.times) > 0.5
    if not mask.any():
        raise EmptyWindowError(
            f"no sample has window weight above 0.5 in [{window.alpha}, {window.beta}]"
        )
    restricted = TimeSeries(data.times[mask], data.values[mask])

    def kernel_for(hz: float) -> CompositeKernel:
        spec = cls(omega=2.0 * math.pi * hz, **fixed_params)
        return CompositeKernel(((window, spec),), noise_variance)

    ordered = sorted(candidates)
    session = InferenceSession(kernel_for(ordered[0]), restricted.times)
    best_hz = None
    best_lml = -math.inf
    for hz in ordered:
        value, _ = session.lml(kernel_for(hz), restricted.values, jitter)
        if value > best_lml:
            best_lml, best_hz = value, hz
    return best_hz
