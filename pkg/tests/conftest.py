"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's solve paths: likelihoods
and posteriors go through explicit matrix inverses and determinants, entries
come from the scalar eval_composite loop, and gradients come from central
finite differences.
"""

import math

import numpy as np
import pytest

from gpaudio import (
    ChangeWindow,
    CompositeKernel,
    ExpCosine,
    ExpCosineQuadratic,
    ExpQuadratic,
    GPModel,
    TimeSeries,
    eval_composite,
    log_marginal_likelihood,
)

LOG_2PI = math.log(2.0 * math.pi)


def dense_gram_loop(kernel, times_a, times_b):
    """Entrywise Gram matrix via the scalar evaluation path."""
    return np.array(
        [[eval_composite(kernel, ta, tb) for tb in times_b] for ta in times_a]
    )


def noisy_gram(model, times):
    K = dense_gram_loop(model.kernel, times, times)
    return K + (model.kernel.noise_variance + model.jitter) * np.eye(len(times))


def naive_lml(model, data):
    """Log marginal likelihood via explicit inverse and determinant."""
    K = noisy_gram(model, data.times)
    inv = np.linalg.inv(K)
    _, logdet = np.linalg.slogdet(K)
    y = data.values
    return -0.5 * (y @ inv @ y) - 0.5 * logdet - 0.5 * len(y) * LOG_2PI


def naive_posterior(model, data, test_times):
    """Posterior mean/covariance via explicit inverse."""
    K = noisy_gram(model, data.times)
    inv = np.linalg.inv(K)
    K_cross = dense_gram_loop(model.kernel, test_times, data.times)
    K_test = dense_gram_loop(model.kernel, test_times, test_times)
    mean = K_cross @ inv @ data.values
    cov = K_test - K_cross @ inv @ K_cross.T
    return mean, cov


def fd_lml_gradient(model, data, selectors, rel_step=1e-6):
    """Central finite differences of the log marginal likelihood."""
    grad = np.empty(len(selectors))
    for j, sel in enumerate(selectors):
        theta = sel.get(model.kernel)
        h = rel_step * max(1.0, abs(theta))
        hi = GPModel(sel.replace(model.kernel, theta + h), model.jitter)
        lo = GPModel(sel.replace(model.kernel, theta - h), model.jitter)
        grad[j] = (log_marginal_likelihood(hi, data) - log_marginal_likelihood(lo, data)) / (2 * h)
    return grad


def random_composite(rng, n_events=None, families=("EQ", "EC", "ECQ"),
                     steepness=(20.0, 200.0), noise=(1e-3, 0.3)):
    """A random, moderately conditioned composite kernel on roughly [0, 1]."""
    if n_events is None:
        n_events = int(rng.integers(1, 4))
    events = []
    for _ in range(n_events):
        onset = float(rng.uniform(0.0, 0.6))
        width = float(rng.uniform(0.15, 0.4))
        w = ChangeWindow(float(rng.uniform(*steepness)), onset, onset + width)
        family = families[int(rng.integers(len(families)))]
        if family == "EQ":
            spec = ExpQuadratic(
                sigma2=float(rng.uniform(0.2, 2.0)), l=float(rng.uniform(0.01, 0.3))
            )
        elif family == "EC":
            spec = ExpCosine(
                z=float(rng.uniform(0.5, 4.0)),
                omega=2.0 * math.pi * float(rng.uniform(2.0, 30.0)),
            )
        else:
            spec = ExpCosineQuadratic(
                z=float(rng.uniform(0.5, 4.0)),
                omega=2.0 * math.pi * float(rng.uniform(2.0, 30.0)),
                l=float(rng.uniform(0.02, 0.4)),
            )
        events.append((w, spec))
    return CompositeKernel(tuple(events), float(rng.uniform(*noise)))


def random_series(rng, n, span=(0.0, 1.0)):
    times = np.sort(rng.uniform(span[0], span[1], size=n))
    while np.any(np.diff(times) <= 0):  # enforce strict increase
        times = np.sort(rng.uniform(span[0], span[1], size=n))
    return TimeSeries(times, rng.standard_normal(n))


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
