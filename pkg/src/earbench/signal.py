"""Fundamental audio types and operations shared by the DSP chain.

Everything here is a pure function on immutable inputs: Waveform instances
are never mutated, so all operations are safe to call from worker threads
or process pools.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile
from scipy.signal import fftconvolve

from earbench import kernels

PROCESSING_RATE_HZ = 16000
DEFAULT_TARGET_RMS = 0.08
RESAMPLE_TAPS = 64


class SignalError(ValueError):
    """Invalid audio data or an unsupported operation on it."""


@dataclass(frozen=True)
class Waveform:
    """A sampled audio signal at full scale (samples nominally within ±1)."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise SignalError(f"waveform must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise SignalError("waveform contains non-finite samples")
        if int(self.sample_rate_hz) <= 0:
            raise SignalError(f"sample rate must be positive, got {self.sample_rate_hz}")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def load_wav(path, channel: int | str = 0) -> Waveform:
    """Read a PCM WAV file (16-bit int or 32-bit float) as a mono Waveform.

    Stereo files yield the requested channel index, or the channel average
    when ``channel="mix"``. Integer samples are normalized by 2**15.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise SignalError(f"unreadable WAV file {path}: {exc}") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32 or data.dtype == np.float64:
        samples = data.astype(np.float64)
    else:
        raise SignalError(
            f"unsupported WAV encoding {data.dtype} in {path}; "
            "expected 16-bit PCM or 32-bit float"
        )
    if samples.ndim == 2:
        if channel == "mix":
            samples = samples.mean(axis=1)
        else:
            idx = int(channel)
            if not 0 <= idx < samples.shape[1]:
                raise SignalError(f"channel {idx} out of range for {path}")
            samples = samples[:, idx]
    if len(samples) == 0:
        raise SignalError(f"zero-length WAV data in {path}")
    return Waveform(samples, int(rate))


def save_wav(waveform: Waveform, path) -> int:
    """Write 16-bit PCM WAV. Returns the number of samples clipped to ±1."""
    x = waveform.samples
    clipped = int(np.count_nonzero((x < -1.0) | (x > 1.0)))
    # scale 2**15 with saturation keeps the round-trip error within half an LSB
    q = np.clip(np.rint(x * 32768.0), -32768, 32767).astype(np.int16)
    wavfile.write(path, waveform.sample_rate_hz, q)
    return clipped


def convolve(speech: Waveform, rir) -> Waveform:
    """Full linear convolution of speech with an RIR (or plain tap sequence).

    Output length is len(speech) + len(rir) - 1; no level normalization is
    applied here (levels are handled by equalize_rms downstream).
    """
    taps, rir_rate = _taps_and_rate(rir)
    if rir_rate is not None and rir_rate != speech.sample_rate_hz:
        raise SignalError(
            f"sample-rate mismatch: speech {speech.sample_rate_hz} Hz "
            f"vs RIR {rir_rate} Hz (resample first)"
        )
    if len(speech) == 0 or len(taps) == 0:
        raise SignalError("convolve requires non-empty inputs")
    out = fftconvolve(speech.samples, taps, mode="full")
    return Waveform(out, speech.sample_rate_hz)


def _taps_and_rate(rir):
    rate = getattr(rir, "sample_rate_hz", None)
    taps = getattr(rir, "coefficients", None)
    if taps is None:
        taps = getattr(rir, "samples", rir)
    return np.asarray(taps, dtype=np.float64), rate


def resample(waveform: Waveform, target_rate_hz: int) -> Waveform:
    """Band-limited resampling with a 64-tap windowed-sinc kernel.

    Output length is round(len * target/source). A same-rate call returns
    the input unchanged.
    """
    target_rate_hz = int(target_rate_hz)
    if target_rate_hz <= 0:
        raise SignalError(f"target rate must be positive, got {target_rate_hz}")
    if target_rate_hz == waveform.sample_rate_hz:
        return waveform
    n_out = int(round(len(waveform) * target_rate_hz / waveform.sample_rate_hz))
    out = kernels.resample_sinc(
        waveform.samples,
        waveform.sample_rate_hz / target_rate_hz,
        n_out,
        RESAMPLE_TAPS,
    )
    return Waveform(out, target_rate_hz)


def rms(waveform: Waveform) -> float:
    """Root-mean-square of the samples."""
    if len(waveform) == 0:
        raise SignalError("rms of empty waveform")
    return float(np.sqrt(np.mean(np.square(waveform.samples))))


def equalize_rms(waveform: Waveform, target_rms: float) -> Waveform:
    """Scale the signal so its RMS equals target_rms."""
    if target_rms <= 0:
        raise SignalError(f"target RMS must be positive, got {target_rms}")
    current = rms(waveform)
    if current == 0.0:
        raise SignalError("cannot equalize an all-zero signal")
    return Waveform(waveform.samples * (target_rms / current), waveform.sample_rate_hz)
