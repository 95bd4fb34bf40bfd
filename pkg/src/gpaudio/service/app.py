"""HTTP service exposing the modelling operations.

Endpoints mirror the CLI subcommands and exchange the same document schemas:
POST /sample, /spectrum, /pitch, /fill, /gen, plus GET /health.  Requests
with unknown or invalid fields are rejected with 422; numerical failures map
to 500 with the attempted jitter in the detail.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import GPAudioError, NumericalError
from ..gp import GPModel, sample_prior
from ..kernels import composite_from_dict, composite_to_dict, kernel_spectrum
from ..schemas import (
    EventDoc,
    FillRequest,
    FillResponse,
    GapReport,
    GenRequest,
    GenResponse,
    PitchEventReport,
    PitchRequest,
    PitchResponse,
    SampleRequest,
    SampleResponse,
    SeriesPayload,
    SpectrumDoc,
    SpectrumResponse,
    WindowDoc,
)
from ..synth import make_preset
from ..tasks import GapSpec, estimate_pitch, fill_gaps


def create_app() -> FastAPI:
    app = FastAPI(title="gpaudio", version=__version__)

    @app.exception_handler(NumericalError)
    async def _numerical(request: Request, exc: NumericalError):
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    @app.exception_handler(GPAudioError)
    async def _domain(request: Request, exc: GPAudioError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/sample", response_model=SampleResponse)
    def sample(request: SampleRequest):
        kernel = composite_from_dict(request.kernel)
        times = request.grid.build()
        draws = sample_prior(GPModel(kernel), times, request.n_samples, request.seed)
        return SampleResponse(times=times.tolist(), samples=draws.tolist())

    @app.post("/spectrum", response_model=SpectrumResponse)
    def spectrum(request: SpectrumDoc):
        density = kernel_spectrum(request.build_kernel(), request.f_max, request.n_points)
        return SpectrumResponse(
            frequencies=density.frequencies.tolist(),
            power=density.power.tolist(),
            warning=density.warning,
        )

    @app.post("/pitch", response_model=PitchResponse)
    def pitch(request: PitchRequest):
        result = estimate_pitch(
            request.data.build(),
            [event.build() for event in request.events],
            request.noise_variance,
            request.optimizer.build(),
            candidates=request.candidates,
        )
        return PitchResponse(
            events=[
                PitchEventReport(
                    omega=e.omega, hz=e.frequency, midi=e.midi,
                    reference=e.reference_hz, error=e.error_semitones,
                )
                for e in result.events
            ],
            rms_semitones=result.rms_semitones,
            final_lml=result.fit.final_lml,
            iterations=result.fit.iterations,
            converged=result.fit.converged,
        )

    @app.post("/fill", response_model=FillResponse)
    def fill(request: FillRequest):
        truth = request.truth.build() if request.truth is not None else None
        result = fill_gaps(
            request.data.build(),
            GapSpec(tuple(request.gaps)),
            composite_from_dict(request.kernel),
            truth=truth,
        )
        return FillResponse(
            gaps=[
                GapReport(
                    start=g.start,
                    end=g.end,
                    rms=g.rms,
                    times=g.prediction.test_times.tolist(),
                    mean=g.prediction.mean.tolist(),
                    variance=g.prediction.variance.tolist(),
                )
                for g in result.gaps
            ]
        )

    @app.post("/gen", response_model=GenResponse)
    def gen(request: GenRequest):
        excerpt = make_preset(request.preset, request.seed, **request.overrides)
        return GenResponse(
            data=SeriesPayload.from_series(excerpt.data),
            clean=SeriesPayload.from_series(excerpt.clean),
            kernel=composite_to_dict(excerpt.kernel),
            events=[
                EventDoc(
                    window=WindowDoc(
                        varsigma=ev.window.varsigma,
                        alpha=ev.window.alpha,
                        beta=ev.window.beta,
                    ),
                    kernel_family=ev.kernel_family,
                    fixed_params=ev.fixed_params,
                    reference_pitch=ev.reference_pitch,
                )
                for ev in excerpt.events
            ],
            gaps=list(excerpt.gaps.intervals) if excerpt.gaps is not None else None,
            noise_variance=excerpt.noise_variance,
        )

    return app


app = create_app()
