"""Command-line interface.

Thin client over the core package: each subcommand reads one JSON config
document, runs one task, and writes its outputs into --out.  All results are
computed before anything is written and each file lands atomically, so a
failed run leaves no partial outputs.  Identical config + inputs + seed give
byte-identical files.

Exit codes: 0 success, 2 configuration errors, 3 input-format errors,
4 numerical errors, 1 anything else.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .audio import load_wav, resample_to_8k, to_time_series, write_wav
from .errors import (
    AudioFormatError,
    ConfigError,
    GPAudioError,
    NumericalError,
    ParameterError,
    SelectorError,
)
from .gp import GPModel, TimeSeries, posterior_predict, sample_prior
from .kernels import composite_to_dict, kernel_spectrum
from .schemas import RunConfig, parse_run_config
from .serialize import (
    prediction_to_csv,
    samples_to_csv,
    spectrum_to_csv,
    timeseries_from_csv,
    timeseries_to_csv,
    trace_to_csv,
    write_json,
)
from .synth import make_preset
from .tasks import estimate_pitch, fill_gaps

EXIT_CONFIG = 2
EXIT_FORMAT = 3
EXIT_NUMERICAL = 4


def _load_config(path: str, task: str, seed: int | None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    config = parse_run_config(raw)
    if config.task is not None and config.task != task:
        raise ConfigError(f"config selects task {config.task!r}, but {task!r} was invoked")
    if seed is not None:
        config = config.model_copy(update={"seed": seed})
    return config


def _load_input_series(config: RunConfig) -> tuple[TimeSeries, float]:
    path = Path(config.require("input"))
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    if path.suffix.lower() == ".wav":
        buf = resample_to_8k(load_wav(path))
        return to_time_series(buf, normalize=config.normalize)
    return timeseries_from_csv(path), 1.0


def _run(task):
    """Execute a task body, mapping error classes to exit codes."""
    try:
        task()
    except (ConfigError, ParameterError, SelectorError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except AudioFormatError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FORMAT)
    except NumericalError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    except GPAudioError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


def _common_options(fn):
    fn = click.option("--config", "config_path", required=True, type=click.Path(),
                      help="JSON run-config document.")(fn)
    fn = click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
                      help="Output directory (created if missing).")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override the config seed.")(fn)
    fn = click.option("--quiet", is_flag=True, help="Suppress progress output.")(fn)
    return fn


def _say(quiet: bool, message: str) -> None:
    if not quiet:
        click.echo(message)


@click.group()
@click.version_option(__version__)
def main():
    """Gaussian-process modelling of music audio."""


@main.command()
@_common_options
def sample(config_path, out_dir, seed, quiet):
    """Draw prior samples from a composite kernel onto a CSV."""

    def task():
        config = _load_config(config_path, "sample", seed)
        kernel = config.build_kernel()
        if config.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        times = config.require("grid").build()
        draws = sample_prior(GPModel(kernel), times, config.n_samples, config.seed)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        samples_to_csv(times, draws, out / "samples.csv")
        _say(quiet, f"wrote {out / 'samples.csv'} ({config.n_samples} draws)")

    _run(task)


@main.command()
@_common_options
def spectrum(config_path, out_dir, seed, quiet):
    """Export the spectral density of a stationary kernel."""

    def task():
        config = _load_config(config_path, "spectrum", seed)
        section = config.require("spectrum")
        density = kernel_spectrum(section.build_kernel(), section.f_max, section.n_points)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        spectrum_to_csv(density.frequencies, density.power, out / "spectrum.csv")
        if density.warning:
            _say(quiet, f"warning: {density.warning}")
        _say(quiet, f"wrote {out / 'spectrum.csv'}")

    _run(task)


@main.command()
@_common_options
def pitch(config_path, out_dir, seed, quiet):
    """Estimate per-event fundamental frequencies from audio or CSV data."""

    def task():
        config = _load_config(config_path, "pitch", seed)
        events = [doc.build() for doc in config.require("events")]
        if config.noise_variance is None:
            raise ConfigError("the pitch task requires 'noise_variance'")
        data, scale = _load_input_series(config)
        optim = config.optimizer.build()
        result = estimate_pitch(
            data, events, config.noise_variance, optim, candidates=config.candidates
        )
        prediction = posterior_predict(result.fit.model, data, data.times)

        report = {
            "task": "pitch",
            "normalization_factor": scale,
            "events": [
                {
                    "omega": e.omega,
                    "hz": e.frequency,
                    "midi": e.midi,
                    **({"reference": e.reference_hz, "error": e.error_semitones}
                       if e.reference_hz is not None else {}),
                }
                for e in result.events
            ],
            "fit": {
                "final_lml": result.fit.final_lml,
                "iterations": result.fit.iterations,
                "converged": result.fit.converged,
            },
        }
        if result.rms_semitones is not None:
            report["rms_semitones"] = result.rms_semitones

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "report.json", report)
        prediction_to_csv(prediction, out / "prediction.csv")
        trace_to_csv(result.fit.trace, out / "trace.csv")
        for e in result.events:
            _say(quiet, f"event: {e.frequency:.3f} Hz (midi {e.midi:.3f})")
        if result.rms_semitones is not None:
            _say(quiet, f"rms error: {result.rms_semitones:.4f} semitones")
        _say(quiet, f"wrote {out / 'report.json'}")

    _run(task)


@main.command()
@_common_options
def fill(config_path, out_dir, seed, quiet):
    """Impute missing-data gaps with a fully specified composite kernel."""

    def task():
        config = _load_config(config_path, "fill", seed)
        kernel = config.build_kernel()
        gaps = config.build_gaps()
        data, scale = _load_input_series(config)
        truth = None
        if config.truth is not None:
            truth = timeseries_from_csv(config.truth)
        result = fill_gaps(data, gaps, kernel, truth=truth)

        report = {
            "task": "fill",
            "normalization_factor": scale,
            "gaps": [
                {"start": g.start, "end": g.end,
                 **({"rms": g.rms} if g.rms is not None else {})}
                for g in result.gaps
            ],
        }
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "report.json", report)
        for i, g in enumerate(result.gaps, start=1):
            prediction_to_csv(g.prediction, out / f"gap_{i}.csv")
            rms = "n/a" if g.rms is None else f"{g.rms:.5f}"
            _say(quiet, f"gap [{g.start:.4f}, {g.end:.4f}): rms {rms}")
        _say(quiet, f"wrote {out / 'report.json'}")

    _run(task)


@main.command()
@_common_options
def gen(config_path, out_dir, seed, quiet):
    """Generate a synthetic excerpt preset (data CSV, WAV, and metadata)."""

    def task():
        config = _load_config(config_path, "gen", seed)
        preset = config.require("preset")
        excerpt = make_preset(preset, config.seed, **config.overrides)

        meta = {
            "preset": preset,
            "seed": config.seed,
            "noise_variance": excerpt.noise_variance,
            "kernel": composite_to_dict(excerpt.kernel),
            "events": [
                {
                    "window": {
                        "varsigma": ev.window.varsigma,
                        "alpha": ev.window.alpha,
                        "beta": ev.window.beta,
                    },
                    "kernel_family": ev.kernel_family,
                    "fixed_params": ev.fixed_params,
                    "reference_pitch": ev.reference_pitch,
                }
                for ev in excerpt.events
            ],
        }
        if excerpt.gaps is not None:
            meta["gaps"] = [list(iv) for iv in excerpt.gaps.intervals]

        sample_rate = round(1.0 / float(np.median(np.diff(excerpt.data.times))))
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        timeseries_to_csv(excerpt.data, out / "data.csv")
        timeseries_to_csv(excerpt.clean, out / "clean.csv")
        write_wav(out / "excerpt.wav", excerpt.data.values, sample_rate, float32=True)
        write_json(out / "meta.json", meta)
        _say(quiet, f"wrote {out / 'data.csv'}, clean.csv, excerpt.wav, meta.json")

    _run(task)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("gpaudio.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
