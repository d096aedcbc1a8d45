"""CI simulation: n-of-m channel selection on an STFT filterbank, threshold/
comfort mapping, and sine-carrier resynthesis.

Pipeline: frame the signal (8 ms frames, 2 ms shift at 16 kHz), take the
one-sided 65-bin spectrum per frame, combine bin powers into 22 band
envelopes, keep the n highest-energy bands per 2 ms cycle, zero envelopes
below the threshold level and clip above the comfort level, then resynthesize
each band as an amplitude-modulated sinusoid at its center frequency and
equalize the result to a target RMS.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from earbench import kernels
from earbench.signal import SignalError, Waveform, equalize_rms, rms

STUDY_CHANNEL_COUNTS = (6, 8, 9, 10, 11, 12)

# Default 22-band allocation over FFT bins 2..64 at 16 kHz / 128-point FFT
# (125 Hz bins): contiguous groups with widths growing roughly geometrically
# from 1 low-frequency bin to 6, unit weights. Clinical maps can be dropped
# in via a config file; this default only approximates one.
_DEFAULT_BAND_WIDTHS = (1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 5, 5, 6, 6)


class VocoderConfigError(ValueError):
    """Inconsistent vocoder configuration."""


@dataclass(frozen=True)
class Band:
    bins: tuple[int, ...]
    weights: tuple[float, ...]
    center_hz: float


def default_band_table(sample_rate_hz: int = 16000, fft_size: int = 128) -> tuple[Band, ...]:
    bin_hz = sample_rate_hz / fft_size
    bands = []
    lo = 2
    for width in _DEFAULT_BAND_WIDTHS:
        bins = tuple(range(lo, lo + width))
        center = float(np.mean(bins) * bin_hz)
        bands.append(Band(bins=bins, weights=(1.0,) * width, center_hz=center))
        lo += width
    return tuple(bands)


@dataclass(frozen=True)
class VocoderConfig:
    sample_rate_hz: int = 16000
    frame_ms: float = 8.0
    shift_ms: float = 2.0
    num_channels: int = 22
    num_selected: int = 8
    band_table: tuple[Band, ...] = field(default_factory=default_band_table)
    threshold_level: tuple[float, ...] = (1e-4,) * 22
    comfort_level: tuple[float, ...] = (1.0,) * 22
    analysis_window: str = "hann"
    envelope_interp: str = "linear"  # or "hold"
    synthesis_phases: tuple[float, ...] = (0.0,) * 22
    pre_emphasis: float = 0.0  # first-order high-pass coefficient, 0 disables

    def __post_init__(self):
        if self.sample_rate_hz <= 0 or self.fft_size <= 0 or self.hop <= 0:
            raise VocoderConfigError("sample rate, frame, and shift must be positive")
        if not 1 <= self.num_selected <= self.num_channels:
            raise VocoderConfigError(
                f"num_selected {self.num_selected} outside [1, {self.num_channels}]"
            )
        if len(self.band_table) != self.num_channels:
            raise VocoderConfigError(
                f"band table has {len(self.band_table)} entries, expected {self.num_channels}"
            )
        for name, levels in (("threshold", self.threshold_level), ("comfort", self.comfort_level)):
            if len(levels) != self.num_channels:
                raise VocoderConfigError(f"{name} levels must have {self.num_channels} entries")
        for i, (t, c) in enumerate(zip(self.threshold_level, self.comfort_level)):
            if not t < c:
                raise VocoderConfigError(f"channel {i}: threshold {t} must be below comfort {c}")
        if self.analysis_window not in ("hann", "rect"):
            raise VocoderConfigError(f"unknown analysis window {self.analysis_window!r}")
        if self.envelope_interp not in ("linear", "hold"):
            raise VocoderConfigError(f"unknown envelope interpolation {self.envelope_interp!r}")
        if len(self.synthesis_phases) != self.num_channels:
            raise VocoderConfigError(f"need {self.num_channels} synthesis phases")
        if not 0.0 <= self.pre_emphasis < 1.0:
            raise VocoderConfigError(f"pre-emphasis must be in [0, 1), got {self.pre_emphasis}")
        self._validate_bands()

    def _validate_bands(self):
        nyq_bin = self.fft_size // 2
        seen: set[int] = set()
        prev_center = 0.0
        prev_first = 0
        for i, band in enumerate(self.band_table):
            if len(band.bins) == 0 or len(band.bins) != len(band.weights):
                raise VocoderConfigError(f"band {i}: bins/weights mismatch or empty")
            for b in band.bins:
                if not 1 <= b <= nyq_bin:
                    raise VocoderConfigError(f"band {i}: bin {b} outside [1, {nyq_bin}]")
                if b in seen:
                    raise VocoderConfigError(f"band {i}: bin {b} used by two bands")
                seen.add(b)
            if min(band.bins) < prev_first:
                raise VocoderConfigError(f"band {i} is not ordered by frequency")
            prev_first = min(band.bins)
            if not band.center_hz > prev_center:
                raise VocoderConfigError(f"band {i}: center frequencies must strictly increase")
            prev_center = band.center_hz
            if band.center_hz >= self.sample_rate_hz / 2:
                raise VocoderConfigError(f"band {i}: center {band.center_hz} Hz at or above Nyquist")

    @property
    def fft_size(self) -> int:
        return int(round(self.frame_ms * self.sample_rate_hz / 1000.0))

    @property
    def hop(self) -> int:
        return int(round(self.shift_ms * self.sample_rate_hz / 1000.0))

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    def window(self) -> np.ndarray:
        if self.analysis_window == "hann":
            # periodic Hann, standard for STFT analysis
            n = self.fft_size
            return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
        return np.ones(self.fft_size)

    def center_frequencies(self) -> np.ndarray:
        return np.array([b.center_hz for b in self.band_table])

    def with_num_selected(self, n: int) -> "VocoderConfig":
        return replace(self, num_selected=n)

    def with_random_phases(self, seed: int) -> "VocoderConfig":
        """Per-channel synthesis phases drawn uniformly from [0, 2pi)."""
        rng = np.random.default_rng(seed)
        phases = tuple(rng.uniform(0.0, 2.0 * np.pi, self.num_channels))
        return replace(self, synthesis_phases=phases)

    # -- config file round-trip (JSON) --------------------------------------

    def to_json(self) -> str:
        payload = {
            "sample_rate_hz": self.sample_rate_hz,
            "frame_ms": self.frame_ms,
            "shift_ms": self.shift_ms,
            "num_channels": self.num_channels,
            "num_selected": self.num_selected,
            "analysis_window": self.analysis_window,
            "envelope_interp": self.envelope_interp,
            "pre_emphasis": self.pre_emphasis,
            "threshold_level": list(self.threshold_level),
            "comfort_level": list(self.comfort_level),
            "synthesis_phases": list(self.synthesis_phases),
            "band_table": [
                {"bins": list(b.bins), "weights": list(b.weights), "center_hz": b.center_hz}
                for b in self.band_table
            ],
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "VocoderConfig":
        raw = json.loads(text)
        bands = tuple(
            Band(tuple(b["bins"]), tuple(b["weights"]), float(b["center_hz"]))
            for b in raw.pop("band_table")
        )
        for key in ("threshold_level", "comfort_level", "synthesis_phases"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(band_table=bands, **raw)

    @classmethod
    def load(cls, path) -> "VocoderConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


@dataclass(frozen=True)
class Electrodogram:
    """Channel-by-cycle stimulation envelopes after selection and T/C mapping."""

    envelopes: np.ndarray  # (num_channels, num_cycles)
    cycle_period_ms: float
    config: VocoderConfig

    def __post_init__(self):
        env = np.asarray(self.envelopes, dtype=np.float64)
        if env.ndim != 2 or env.shape[0] != self.config.num_channels:
            raise VocoderConfigError(f"electrodogram shape {env.shape} invalid")
        env.flags.writeable = False
        object.__setattr__(self, "envelopes", env)

    @property
    def num_cycles(self) -> int:
        return self.envelopes.shape[1]

    def nonzero_counts(self) -> np.ndarray:
        """Number of active channels in each stimulation cycle."""
        return np.count_nonzero(self.envelopes, axis=0)


def frame_signal(waveform: Waveform, config: VocoderConfig) -> np.ndarray:
    """Windowed analysis frames, one per 2 ms cycle; the tail is zero-padded.

    Returns an array of shape (ceil(len/hop), fft_size).
    """
    if waveform.sample_rate_hz != config.sample_rate_hz:
        raise SignalError(
            f"waveform at {waveform.sample_rate_hz} Hz, config expects {config.sample_rate_hz}"
        )
    x = waveform.samples
    hop, size = config.hop, config.fft_size
    num_frames = max(1, -(-len(x) // hop))  # ceil division
    padded = np.zeros((num_frames - 1) * hop + size)
    padded[: len(x)] = x
    idx = np.arange(num_frames)[:, None] * hop + np.arange(size)[None, :]
    return padded[idx] * config.window()[None, :]


def analyze_spectrum(frame: np.ndarray, fft_size: int = 128) -> np.ndarray:
    """One-sided DFT of a frame: bins 0..fft_size/2 (DC through Nyquist)."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[-1] != fft_size:
        raise VocoderConfigError(f"frame length {frame.shape[-1]} != fft size {fft_size}")
    return np.fft.rfft(frame, n=fft_size, axis=-1)


def _band_weight_matrix(config: VocoderConfig) -> np.ndarray:
    w = np.zeros((config.num_channels, config.num_bins))
    for i, band in enumerate(config.band_table):
        for b, weight in zip(band.bins, band.weights):
            w[i, b] = weight
    return w


def apply_filterbank(magnitudes: np.ndarray, config: VocoderConfig) -> np.ndarray:
    """Band envelopes from bin magnitudes: sqrt of the weighted power sum.

    Accepts a single 65-vector or a (frames, 65) matrix; returns matching
    (..., num_channels) envelopes.
    """
    mags = np.asarray(magnitudes, dtype=np.float64)
    if mags.shape[-1] != config.num_bins:
        raise VocoderConfigError(f"expected {config.num_bins} magnitudes, got {mags.shape[-1]}")
    w = _band_weight_matrix(config)
    return np.sqrt(np.square(mags) @ w.T)


def select_maxima(envelopes: np.ndarray, n: int) -> np.ndarray:
    """Boolean mask of the n highest-energy channels; ties go to the lower index."""
    env = np.asarray(envelopes, dtype=np.float64)
    squeeze = env.ndim == 1
    env2 = np.atleast_2d(env)
    if not 1 <= n <= env2.shape[1]:
        raise VocoderConfigError(f"cannot select {n} of {env2.shape[1]} channels")
    mask = kernels.top_n_mask(env2, n)
    return mask[0] if squeeze else mask


def map_dynamic_range(envelopes: np.ndarray, mask: np.ndarray, config: VocoderConfig) -> np.ndarray:
    """Zero out unselected and sub-threshold channels, clip at comfort level."""
    env = np.atleast_2d(np.asarray(envelopes, dtype=np.float64))
    squeeze = np.asarray(envelopes).ndim == 1
    t = np.asarray(config.threshold_level)
    c = np.asarray(config.comfort_level)
    out = np.where(env < t, 0.0, np.minimum(env, c))
    out = np.where(np.atleast_2d(mask), out, 0.0)
    return out[0] if squeeze else out


def synthesize_sine(egram: Electrodogram, config: VocoderConfig | None = None) -> Waveform:
    """Sum of sinusoids at band centers, amplitude-modulated by the envelopes.

    Envelope values are anchored at cycle boundaries and linearly interpolated
    between them (or held, per config); output spans num_cycles * hop samples.
    """
    cfg = config or egram.config
    out = kernels.synth_sines(
        egram.envelopes,
        cfg.center_frequencies(),
        np.asarray(cfg.synthesis_phases, dtype=np.float64),
        cfg.hop,
        float(cfg.sample_rate_hz),
        cfg.envelope_interp == "hold",
    )
    return Waveform(out, cfg.sample_rate_hz)


def electrodogram(speech: Waveform, config: VocoderConfig) -> Electrodogram:
    """Analysis half of the vocoder: framing through dynamic-range mapping."""
    if config.pre_emphasis > 0.0:
        x = speech.samples.copy()
        x[1:] -= config.pre_emphasis * x[:-1]
        speech = Waveform(x, speech.sample_rate_hz)
    frames = frame_signal(speech, config)
    spectra = analyze_spectrum(frames, config.fft_size)
    # normalize so a full-scale sinusoid maps to an envelope near 1.0,
    # putting the default threshold/comfort levels on a meaningful scale
    mags = np.abs(spectra) * (2.0 / np.sum(config.window()))
    env = apply_filterbank(mags, config)
    mask = select_maxima(env, config.num_selected)
    mapped = map_dynamic_range(env, mask, config)
    return Electrodogram(mapped.T, config.shift_ms, config)


def vocode(speech: Waveform, config: VocoderConfig, target_rms: float = 0.08) -> Waveform:
    """Full chain: analyze, select, map, resynthesize, equalize RMS."""
    if len(speech) == 0 or rms(speech) == 0.0:
        raise SignalError("vocode requires a non-silent input signal")
    egram = electrodogram(speech, config)
    out = synthesize_sine(egram)
    return equalize_rms(out, target_rms)
