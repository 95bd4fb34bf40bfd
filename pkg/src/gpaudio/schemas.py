"""Pydantic document and request/response models.

One schema layer serves both surfaces: the CLI reads a JSON run-config
document, the HTTP service receives the same section objects inside request
bodies.  Every model forbids unknown fields.  Composite-kernel documents are
validated by the core parser (`kernels.composite_from_dict`) so the wire
format has a single source of truth.
"""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, field_validator

from .errors import ConfigError
from .gp import TimeSeries
from .kernels import (
    ChangeWindow,
    CompositeKernel,
    KernelSpec,
    composite_from_dict,
    spec_from_dict,
)
from .optimize import OptimConfig
from .tasks import EventConfig, GapSpec
from .errors import GPAudioError


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WindowDoc(StrictModel):
    varsigma: float
    alpha: float
    beta: float

    def build(self) -> ChangeWindow:
        return ChangeWindow(self.varsigma, self.alpha, self.beta)


class EventDoc(StrictModel):
    window: WindowDoc
    kernel_family: str
    fixed_params: dict[str, float]
    reference_pitch: Optional[float] = None

    def build(self) -> EventConfig:
        return EventConfig(
            self.window.build(), self.kernel_family, dict(self.fixed_params),
            self.reference_pitch,
        )


class OptimizerDoc(StrictModel):
    free_params: list[str] = []
    max_iters: int = 500
    step_size: float = 0.01
    grad_tol: float = 1e-5
    restarts: int = 1
    seed: int = 0

    def build(self) -> OptimConfig:
        return OptimConfig(
            free_params=tuple(self.free_params),
            max_iters=self.max_iters,
            step_size=self.step_size,
            grad_tol=self.grad_tol,
            restarts=self.restarts,
            seed=self.seed,
        )


class GridDoc(StrictModel):
    start: float
    stop: float
    num: int

    def build(self):
        import numpy as np

        if self.num < 1 or not self.stop > self.start:
            raise ConfigError("grid requires start < stop and num >= 1")
        return np.linspace(self.start, self.stop, self.num)


class SpectrumDoc(StrictModel):
    kernel: dict[str, Any]
    f_max: float
    n_points: int

    @field_validator("kernel")
    @classmethod
    def _check_kernel(cls, value):
        spec_from_dict(value)
        return value

    def build_kernel(self) -> KernelSpec:
        return spec_from_dict(self.kernel)


class SeriesPayload(StrictModel):
    times: list[float]
    values: list[float]

    def build(self) -> TimeSeries:
        return TimeSeries(self.times, self.values)

    @classmethod
    def from_series(cls, series: TimeSeries) -> "SeriesPayload":
        return cls(times=series.times.tolist(), values=series.values.tolist())


def _check_composite(value: dict) -> dict:
    composite_from_dict(value)
    return value


class RunConfig(StrictModel):
    """The CLI's single configuration document.

    Each subcommand reads the sections it needs; `task`, when present, must
    match the invoked subcommand.
    """

    task: Optional[str] = None
    seed: int = 0
    normalize: bool = True
    input: Optional[str] = None
    truth: Optional[str] = None
    kernel: Optional[dict[str, Any]] = None
    events: Optional[list[EventDoc]] = None
    optimizer: OptimizerDoc = OptimizerDoc()
    gaps: Optional[list[tuple[float, float]]] = None
    grid: Optional[GridDoc] = None
    n_samples: int = 2
    spectrum: Optional[SpectrumDoc] = None
    preset: Optional[str] = None
    overrides: dict[str, float] = {}
    candidates: Optional[list[float]] = None
    noise_variance: Optional[float] = None

    @field_validator("kernel")
    @classmethod
    def _kernel_doc(cls, value):
        return None if value is None else _check_composite(value)

    def build_kernel(self) -> CompositeKernel:
        if self.kernel is None:
            raise ConfigError("this task requires a 'kernel' section")
        return composite_from_dict(self.kernel)

    def build_gaps(self) -> GapSpec:
        if not self.gaps:
            raise ConfigError("this task requires a non-empty 'gaps' section")
        return GapSpec(tuple(self.gaps))

    def require(self, name: str):
        value = getattr(self, name)
        if value is None:
            raise ConfigError(f"this task requires a {name!r} section")
        return value


# ---------------------------------------------------------------------------
# service request/response bodies
# ---------------------------------------------------------------------------

class SampleRequest(StrictModel):
    kernel: dict[str, Any]
    grid: GridDoc
    n_samples: int = 2
    seed: int = 0

    @field_validator("kernel")
    @classmethod
    def _kernel_doc(cls, value):
        return _check_composite(value)


class SampleResponse(BaseModel):
    times: list[float]
    samples: list[list[float]]


class SpectrumResponse(BaseModel):
    frequencies: list[float]
    power: list[float]
    warning: Optional[str] = None


class PitchRequest(StrictModel):
    data: SeriesPayload
    events: list[EventDoc]
    noise_variance: float
    optimizer: OptimizerDoc = OptimizerDoc()
    candidates: Optional[list[float]] = None


class PitchEventReport(BaseModel):
    omega: float
    hz: float
    midi: float
    reference: Optional[float] = None
    error: Optional[float] = None


class PitchResponse(BaseModel):
    events: list[PitchEventReport]
    rms_semitones: Optional[float] = None
    final_lml: float
    iterations: int
    converged: bool


class FillRequest(StrictModel):
    data: SeriesPayload
    gaps: list[tuple[float, float]]
    kernel: dict[str, Any]
    truth: Optional[SeriesPayload] = None

    @field_validator("kernel")
    @classmethod
    def _kernel_doc(cls, value):
        return _check_composite(value)


class GapReport(BaseModel):
    start: float
    end: float
    rms: Optional[float] = None
    times: list[float]
    mean: list[float]
    variance: list[float]


class FillResponse(BaseModel):
    gaps: list[GapReport]


class GenRequest(StrictModel):
    preset: str
    seed: int = 0
    overrides: dict[str, float] = {}


class GenResponse(BaseModel):
    data: SeriesPayload
    clean: SeriesPayload
    kernel: dict[str, Any]
    events: list[EventDoc]
    gaps: Optional[list[tuple[float, float]]] = None
    noise_variance: float


def parse_run_config(raw: dict) -> RunConfig:
    """Validate a raw JSON document, mapping every failure to ConfigError."""
    try:
        return RunConfig.model_validate(raw)
    except GPAudioError:
        raise
    except Exception as exc:  # pydantic ValidationError and friends
        raise ConfigError(f"invalid configuration: {exc}") from exc
