"""Gaussian-process modelling of music audio at the sample level.

Non-stationary covariance kernels built from change-windows and harmonic
stationary parts, exact GP inference with gradient-based hyperparameter
learning, and two analysis tasks: per-note pitch estimation and missing-data
gap imputation.
"""

from .errors import (
    AlignmentError,
    AudioFormatError,
    ConfigError,
    EmptyWindowError,
    GPAudioError,
    NumericalError,
    ParameterError,
    SampleRateError,
    SelectorError,
)
from .kernels import (
    ChangeWindow,
    CompositeKernel,
    ExpCosine,
    ExpCosineQuadratic,
    ExpQuadratic,
    KernelSpec,
    ParamSelector,
    SpectralDensity,
    composite_from_dict,
    composite_to_dict,
    eval_composite,
    eval_stationary,
    eval_window,
    gram,
    gram_gradient,
    kernel_spectrum,
)
from .gp import (
    GPModel,
    PosteriorPrediction,
    TimeSeries,
    log_marginal_likelihood,
    lml_gradient,
    posterior_predict,
    sample_prior,
)
from .optimize import FitResult, OptimConfig, fit, frequency_grid_init, semitone_ladder
from .tasks import (
    EventConfig,
    GapFillResult,
    GapSpec,
    PitchResult,
    estimate_pitch,
    fill_gaps,
    hz_to_midi,
)
from .audio import AudioBuffer, load_wav, resample_to_8k, to_time_series, write_wav
from . import synth

__version__ = "0.1.0"
