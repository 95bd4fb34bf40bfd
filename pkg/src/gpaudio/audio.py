"""WAV ingestion, 8 kHz decimation, and TimeSeries construction.

Only RIFF/WAVE containers holding 16-bit PCM or 32-bit IEEE float, one or two
channels, are accepted; stereo mixes down by arithmetic mean.  Decimation
targets the modelling rate of 8 kHz with a windowed-sinc (Kaiser) lowpass cut
at 3600 Hz and at least 60 dB of stopband attenuation by 4 kHz.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .errors import AudioFormatError, ParameterError, SampleRateError
from .gp import TimeSeries

__all__ = [
    "AudioBuffer",
    "load_wav",
    "write_wav",
    "resample_to_8k",
    "to_time_series",
    "TARGET_RATE",
]

TARGET_RATE = 8000
SUPPORTED_INPUT_RATES = (8000, 44100, 48000)
_CUTOFF_HZ = 3600.0  # 0.45 * TARGET_RATE
_STOPBAND_EDGE_HZ = 4000.0
_STOPBAND_DB = 80.0  # design margin over the 60 dB requirement

_FMT_PCM = 1
_FMT_IEEE_FLOAT = 3


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio samples at an integer sample rate."""

    sample_rate: int
    samples: np.ndarray
    channels: int = 1

    def __post_init__(self):
        if int(self.sample_rate) <= 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size == 0:
            raise ParameterError("samples must be a non-empty 1-D array")
        if not np.isfinite(samples).all():
            raise ParameterError("samples contain non-finite values")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def load_wav(path) -> AudioBuffer:
    """Decode a RIFF/WAVE file (PCM16 or float32, 1-2 channels) to mono."""
    with open(path, "rb") as handle:
        blob = handle.read()
    if len(blob) < 12:
        raise AudioFormatError("file too short for a RIFF header", offset=0)
    if blob[0:4] != b"RIFF":
        raise AudioFormatError(f"not a RIFF container: {blob[0:4]!r}", offset=0)
    if blob[8:12] != b"WAVE":
        raise AudioFormatError(f"not a WAVE form: {blob[8:12]!r}", offset=8)

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        chunk_id = blob[pos : pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body_start = pos + 8
        if body_start + size > len(blob):
            raise AudioFormatError(
                f"chunk {chunk_id!r} of size {size} overruns the file", offset=pos
            )
        if chunk_id == b"fmt ":
            if size < 16:
                raise AudioFormatError("fmt chunk shorter than 16 bytes", offset=pos)
            fmt = struct.unpack_from("<HHIIHH", blob, body_start)
            fmt_offset = pos
        elif chunk_id == b"data":
            data = blob[body_start : body_start + size]
            data_offset = pos
        pos = body_start + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise AudioFormatError("missing fmt chunk", offset=12)
    if data is None:
        raise AudioFormatError("missing data chunk", offset=12)
    audio_format, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if channels not in (1, 2):
        raise AudioFormatError(f"unsupported channel count {channels}", offset=fmt_offset)

    if audio_format == _FMT_PCM and bits == 16:
        raw = np.frombuffer(data, dtype="<i2")
        scale = 1.0 / 32768.0
        frames = raw.astype(float) * scale
    elif audio_format == _FMT_IEEE_FLOAT and bits == 32:
        frames = np.frombuffer(data, dtype="<f4").astype(float)
    else:
        raise AudioFormatError(
            f"unsupported codec: format tag {audio_format}, {bits} bits per sample",
            offset=fmt_offset,
        )
    if frames.size == 0:
        raise AudioFormatError("data chunk holds zero samples", offset=data_offset)
    if frames.size % channels:
        raise AudioFormatError(
            f"data chunk length is not a multiple of the frame size", offset=data_offset
        )
    if channels == 2:
        frames = frames.reshape(-1, 2).mean(axis=1)
    return AudioBuffer(sample_rate, frames, channels=1)


def write_wav(path, samples, sample_rate: int, float32: bool = False) -> None:
    """Minimal WAV writer (mono) used by the generator and tests."""
    samples = np.asarray(samples, dtype=float)
    if float32:
        payload = samples.astype("<f4").tobytes()
        audio_format, bits = _FMT_IEEE_FLOAT, 32
    else:
        clipped = np.clip(np.round(samples * 32768.0), -32768, 32767)
        payload = clipped.astype("<i2").tobytes()
        audio_format, bits = _FMT_PCM, 16
    block_align = bits // 8
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, audio_format, 1, sample_rate,
        sample_rate * block_align, block_align, bits,
    )
    header += b"data" + struct.pack("<I", len(payload))
    with open(path, "wb") as handle:
        handle.write(header + payload)


def _decimation_filter(input_rate: int, up: int) -> np.ndarray:
    """Kaiser windowed-sinc lowpass at the upsampled rate (cached per rate)."""
    fs_up = input_rate * up
    width = 2.0 * (_STOPBAND_EDGE_HZ - _CUTOFF_HZ) / fs_up  # normalized to Nyquist
    numtaps, beta = scipy.signal.kaiserord(_STOPBAND_DB, width)
    numtaps |= 1
    return scipy.signal.firwin(
        numtaps, _CUTOFF_HZ, window=("kaiser", beta), fs=fs_up
    )


_FILTMAP = {44100: (80, 441), 48000: (1, 6)}
_FILTER_CACHE: dict[int, np.ndarray] = {}


def resample_to_8k(buf: AudioBuffer) -> AudioBuffer:
    """Decimate to 8 kHz; output length is round(n * 8000 / rate)."""
    if buf.sample_rate == TARGET_RATE:
        return buf
    if buf.sample_rate not in _FILTMAP:
        raise SampleRateError(
            f"unsupported input rate {buf.sample_rate}; expected one of {SUPPORTED_INPUT_RATES}"
        )
    up, down = _FILTMAP[buf.sample_rate]
    h = _FILTER_CACHE.get(buf.sample_rate)
    if h is None:
        h = _decimation_filter(buf.sample_rate, up)
        _FILTER_CACHE[buf.sample_rate] = h
    out = scipy.signal.resample_poly(buf.samples, up, down, window=h)
    n_out = round(buf.samples.size * TARGET_RATE / buf.sample_rate)
    return AudioBuffer(TARGET_RATE, out[:n_out], channels=1)


def to_time_series(buf: AudioBuffer, normalize: bool = True) -> tuple[TimeSeries, float]:
    """TimeSeries at times i/rate; returns (series, scale factor applied)."""
    peak = float(np.abs(buf.samples).max())
    scale = 1.0
    values = buf.samples
    if normalize:
        if peak == 0.0:
            raise ParameterError("cannot normalize an all-zero buffer")
        scale = 1.0 / peak
        values = buf.samples * scale
    times = np.arange(buf.samples.size) / buf.sample_rate
    return TimeSeries(times, values), scale
