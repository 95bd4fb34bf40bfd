"""CSV import/export and atomic file writes.

All CSVs use '.' as the decimal separator, LF line endings, and shortest
round-trip float formatting, so identical inputs produce byte-identical
files.  Writers stage into a temporary sibling and rename, so a failed run
never leaves a truncated file behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError
from .gp import PosteriorPrediction, TimeSeries


def fmt(value: float) -> str:
    return repr(float(value))


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: str | None, rows: Iterable[Iterable[float]]) -> None:
    lines = [] if header is None else [header]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


# ---------------------------------------------------------------------------
# typed exports
# ---------------------------------------------------------------------------

def timeseries_to_csv(series: TimeSeries, path) -> None:
    write_csv(path, "time,value", zip(series.times, series.values))


def timeseries_from_csv(path) -> TimeSeries:
    path = Path(path)
    with open(path, newline="") as handle:
        first = handle.readline().strip()
        if first != "time,value":
            raise ConfigError(f"{path}: expected header 'time,value', got {first!r}")
        try:
            body = np.loadtxt(handle, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ConfigError(f"{path}: malformed CSV body ({exc})") from exc
    if body.size == 0 or body.shape[1] != 2:
        raise ConfigError(f"{path}: expected two columns of samples")
    return TimeSeries(body[:, 0], body[:, 1])


def prediction_to_csv(prediction: PosteriorPrediction, path) -> None:
    write_csv(
        path,
        "time,mean,variance",
        zip(prediction.test_times, prediction.mean, prediction.variance),
    )


def covariance_to_csv(covariance: np.ndarray, path) -> None:
    """Full posterior covariance, row-major, one matrix row per line."""
    write_csv(path, None, covariance)


def samples_to_csv(times: np.ndarray, samples: np.ndarray, path) -> None:
    """Prior draws: header time,sample_1,...,sample_n; draws are rows of `samples`."""
    n = samples.shape[0]
    header = "time," + ",".join(f"sample_{i + 1}" for i in range(n))
    write_csv(path, header, zip(times, *samples))


def trace_to_csv(trace, path) -> None:
    lines = ["iter,lml,grad_norm"]
    for i, (lml, grad_norm) in enumerate(trace):
        lines.append(f"{i},{fmt(lml)},{fmt(grad_norm)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def spectrum_to_csv(frequencies: np.ndarray, power: np.ndarray, path) -> None:
    write_csv(path, "frequency_hz,power", zip(frequencies, power))
