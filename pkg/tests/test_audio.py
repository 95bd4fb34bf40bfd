"""WAV decoding, resampling, and TimeSeries construction."""

import math
import struct

import numpy as np
import pytest

from gpaudio import (
    AudioBuffer,
    AudioFormatError,
    ParameterError,
    SampleRateError,
    load_wav,
    resample_to_8k,
    to_time_series,
    write_wav,
)


def wav_bytes(frames: bytes, *, channels=1, rate=8000, bits=16, tag=1,
              riff=b"RIFF", wave=b"WAVE") -> bytes:
    """Hand-packed RIFF/WAVE blob, independent of the library's writer."""
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, rate, rate * block, block, bits)
    body = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(frames)) + frames
    return riff + struct.pack("<I", 4 + len(body)) + wave + body


class TestLoadWav:
    def test_pcm16_scaling(self, tmp_path):
        path = tmp_path / "one.wav"
        path.write_bytes(wav_bytes(struct.pack("<h", 16384)))
        buf = load_wav(path)
        assert buf.sample_rate == 8000
        assert buf.samples.tolist() == [0.5]

    def test_stereo_mean_mixdown(self, tmp_path):
        frames = b"".join(
            struct.pack("<hh", round(0.2 * 32768), round(0.4 * 32768)) for _ in range(10)
        )
        path = tmp_path / "stereo.wav"
        path.write_bytes(wav_bytes(frames, channels=2))
        buf = load_wav(path)
        np.testing.assert_allclose(buf.samples, 0.3, atol=1e-4)
        assert buf.channels == 1

    def test_float32_payload(self, tmp_path):
        values = np.array([0.25, -0.5, 0.75], dtype="<f4")
        path = tmp_path / "float.wav"
        path.write_bytes(wav_bytes(values.tobytes(), bits=32, tag=3))
        buf = load_wav(path)
        np.testing.assert_array_equal(buf.samples, values.astype(float))

    def test_sine_round_trip_peaks_at_its_frequency(self, tmp_path):
        rate, freq = 8000, 1000
        t = np.arange(rate) / rate
        tone = 0.8 * np.sin(2 * math.pi * freq * t)
        path = tmp_path / "tone.wav"
        write_wav(path, tone, rate)
        buf = load_wav(path)
        spectrum = np.abs(np.fft.rfft(buf.samples))
        peak_hz = np.fft.rfftfreq(buf.samples.size, 1 / rate)[np.argmax(spectrum)]
        assert peak_hz == pytest.approx(freq, abs=1.0)

    def test_not_riff_rejected_with_offset(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(wav_bytes(b"\x00\x00", riff=b"JUNK"))
        with pytest.raises(AudioFormatError, match="offset 0"):
            load_wav(path)

    def test_not_wave_rejected_with_offset(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(wav_bytes(b"\x00\x00", wave=b"AVI "))
        with pytest.raises(AudioFormatError, match="offset 8"):
            load_wav(path)

    def test_unsupported_codec_rejected(self, tmp_path):
        path = tmp_path / "ulaw.wav"
        path.write_bytes(wav_bytes(b"\x00" * 8, bits=8, tag=7))
        with pytest.raises(AudioFormatError, match="codec"):
            load_wav(path)

    def test_zero_samples_rejected(self, tmp_path):
        path = tmp_path / "empty.wav"
        path.write_bytes(wav_bytes(b""))
        with pytest.raises(AudioFormatError, match="zero samples"):
            load_wav(path)

    def test_three_channels_rejected(self, tmp_path):
        path = tmp_path / "surround.wav"
        path.write_bytes(wav_bytes(b"\x00\x00" * 3, channels=3))
        with pytest.raises(AudioFormatError, match="channel"):
            load_wav(path)

    def test_truncated_chunk_rejected(self, tmp_path):
        blob = wav_bytes(b"\x00\x00" * 4)
        path = tmp_path / "trunc.wav"
        path.write_bytes(blob[:-3])
        with pytest.raises(AudioFormatError):
            load_wav(path)


class TestResample:
    def test_8k_passes_through_unchanged(self):
        buf = AudioBuffer(8000, np.linspace(-0.5, 0.5, 100))
        out = resample_to_8k(buf)
        assert out is buf

    def test_output_length_is_rounded_ratio(self):
        # 0.7 s at 44.1 kHz -> exactly 5600 samples at 8 kHz
        buf = AudioBuffer(44100, np.zeros(30870) + 0.01)
        assert resample_to_8k(buf).samples.size == 5600
        buf = AudioBuffer(44100, np.zeros(30871) + 0.01)
        assert resample_to_8k(buf).samples.size == round(30871 * 8000 / 44100)

    def test_passband_tone_amplitude_preserved(self):
        rate = 44100
        t = np.arange(int(0.5 * rate)) / rate
        tone = np.sin(2 * math.pi * 1000 * t)
        out = resample_to_8k(AudioBuffer(rate, tone))
        mid = out.samples[400:-400]  # ignore filter edges
        assert np.abs(mid).max() == pytest.approx(1.0, rel=0.01)

    def test_stopband_tone_rejected_60db(self):
        rate = 44100
        t = np.arange(int(0.5 * rate)) / rate
        tone = np.sin(2 * math.pi * 5000 * t)
        out = resample_to_8k(AudioBuffer(rate, tone))
        in_rms = math.sqrt(0.5)
        out_rms = float(np.sqrt(np.mean(out.samples[400:-400] ** 2)))
        assert out_rms < 1e-3 * in_rms

    def test_48k_supported(self):
        rate = 48000
        t = np.arange(int(0.25 * rate)) / rate
        tone = np.sin(2 * math.pi * 500 * t)
        out = resample_to_8k(AudioBuffer(rate, tone))
        assert out.sample_rate == 8000
        assert out.samples.size == round(tone.size * 8000 / 48000)
        assert np.abs(out.samples[200:-200]).max() == pytest.approx(1.0, rel=0.01)

    def test_linearity(self):
        rate = 44100
        rng = np.random.default_rng(4)
        x = rng.standard_normal(rate // 2) * 0.1
        a = resample_to_8k(AudioBuffer(rate, x)).samples
        b = resample_to_8k(AudioBuffer(rate, 3.0 * x)).samples
        np.testing.assert_allclose(b, 3.0 * a, rtol=1e-12, atol=1e-15)

    def test_unsupported_rate_rejected(self):
        with pytest.raises(SampleRateError):
            resample_to_8k(AudioBuffer(22050, np.zeros(10) + 0.1))


class TestToTimeSeries:
    def test_time_grid_at_sample_rate(self):
        buf = AudioBuffer(8000, np.array([0.1, 0.2, 0.3]))
        series, scale = to_time_series(buf, normalize=False)
        np.testing.assert_allclose(series.times, [0.0, 1.25e-4, 2.5e-4], rtol=0, atol=0)
        assert scale == 1.0
        np.testing.assert_array_equal(series.values, buf.samples)

    def test_uniform_spacing_to_ulp(self):
        buf = AudioBuffer(8000, np.full(8000, 0.5))
        series, _ = to_time_series(buf, normalize=False)
        np.testing.assert_allclose(np.diff(series.times), 1.0 / 8000, rtol=1e-12)

    def test_normalization_reports_factor(self):
        buf = AudioBuffer(8000, np.array([0.1, -0.25, 0.2]))
        series, scale = to_time_series(buf, normalize=True)
        assert scale == pytest.approx(4.0)
        assert np.abs(series.values).max() == pytest.approx(1.0)

    def test_all_zero_normalization_rejected(self):
        buf = AudioBuffer(8000, np.zeros(4) + 0.0)
        with pytest.raises(ParameterError, match="all-zero"):
            to_time_series(buf, normalize=True)

    def test_csv_export_round_trips_bit_identically(self, tmp_path):
        from gpaudio.serialize import timeseries_from_csv, timeseries_to_csv

        rng = np.random.default_rng(17)
        buf = AudioBuffer(8000, rng.uniform(-0.9, 0.9, size=64))
        series, _ = to_time_series(buf, normalize=True)
        path = tmp_path / "audio.csv"
        timeseries_to_csv(series, path)
        back = timeseries_from_csv(path)
        assert np.array_equal(back.times, series.times)
        assert np.array_equal(back.values, series.values)
