"""Room impulse response metrics: direct-to-reverberant ratio and RT60.

The decay curve comes from backward integration of the squared impulse
response; RT60 is extrapolated from a least-squares line fit over a
configurable region of that curve (default -5 to -35 dB, the usual T30
practice). The direct-path window runs from the start of the RIR through
8 ms after its largest-magnitude tap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from earbench.signal import Waveform, load_wav, resample

DIRECT_PATH_TAIL_S = 0.008
DB_FLOOR = -120.0
DEFAULT_FIT_RANGE_DB = (-5.0, -35.0)
PEAK_ANCHOR_LEAD_S = 0.0005


class RirError(ValueError):
    """Invalid RIR data."""


class AnechoicRirError(RirError):
    """No energy outside the direct-path window, so DRR is undefined."""


class InsufficientDecayError(RirError):
    """Decay curve never spans the requested fit range."""


@dataclass(frozen=True)
class RoomImpulseResponse:
    coefficients: np.ndarray
    sample_rate_hz: int
    channel: str = "left"
    room: str = ""
    distance_m: float | None = None
    dimensions_m: tuple[float, ...] = ()

    def __post_init__(self):
        taps = np.asarray(self.coefficients, dtype=np.float64)
        if taps.ndim != 1 or len(taps) == 0:
            raise RirError("RIR must be a non-empty 1-D tap sequence")
        if not np.all(np.isfinite(taps)):
            raise RirError("RIR contains non-finite coefficients")
        if not np.any(taps):
            raise RirError("RIR has no nonzero coefficient")
        taps.flags.writeable = False
        object.__setattr__(self, "coefficients", taps)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))
        if self.channel.lower() not in ("left", "right"):
            raise RirError(f"channel must be left or right, got {self.channel!r}")
        object.__setattr__(self, "channel", self.channel.lower())

    def __len__(self) -> int:
        return len(self.coefficients)

    def resampled(self, target_rate_hz: int) -> "RoomImpulseResponse":
        wav = Waveform(self.coefficients, self.sample_rate_hz)
        out = resample(wav, target_rate_hz)
        return RoomImpulseResponse(
            out.samples, target_rate_hz, self.channel, self.room,
            self.distance_m, self.dimensions_m,
        )


@dataclass(frozen=True)
class RirMetrics:
    rt60_s: float
    drr_db: float
    direct_window: tuple[int, int]

    def __post_init__(self):
        if self.rt60_s <= 0:
            raise RirError(f"RT60 must be positive, got {self.rt60_s}")
        lo, hi = self.direct_window
        if hi <= lo:
            raise RirError(f"direct window {self.direct_window} is empty")


def direct_path_window(rir: RoomImpulseResponse, anchor: str = "zero") -> tuple[int, int]:
    """Inclusive index range of the direct-path portion of the RIR.

    The window ends 8 ms after the largest-magnitude tap (clamped to the RIR
    length). anchor="zero" starts it at sample 0; anchor="peak" starts it
    0.5 ms ahead of the peak, for RIRs with non-trivial pre-delay energy.
    """
    h = rir.coefficients
    peak = int(np.argmax(np.abs(h)))
    end = min(peak + int(round(DIRECT_PATH_TAIL_S * rir.sample_rate_hz)), len(h) - 1)
    if anchor == "zero":
        start = 0
    elif anchor == "peak":
        start = max(0, peak - int(round(PEAK_ANCHOR_LEAD_S * rir.sample_rate_hz)))
    else:
        raise ValueError(f"unknown window anchor {anchor!r}")
    return (start, end)


def compute_drr(rir: RoomImpulseResponse, anchor: str = "zero") -> float:
    """Direct-to-reverberant ratio in dB: direct-window energy over the rest."""
    start, end = direct_path_window(rir, anchor)
    h2 = np.square(rir.coefficients)
    direct = float(np.sum(h2[start : end + 1]))
    tail = float(np.sum(h2)) - direct
    if tail <= 0.0:
        raise AnechoicRirError(
            "no energy outside the direct-path window (anechoic RIR, DRR undefined)"
        )
    if direct <= 0.0:
        raise RirError("direct-path window has zero energy")
    return 10.0 * np.log10(direct / tail)


def schroeder_decay(rir: RoomImpulseResponse) -> np.ndarray:
    """Energy decay curve in dB via backward integration of the squared RIR.

    curve[n] = 10*log10(sum_{k>=n} h[k]^2 / total energy), floored at -120 dB.
    Monotonically non-increasing with curve[0] == 0.
    """
    h2 = np.square(rir.coefficients)
    edc = np.cumsum(h2[::-1])[::-1]
    total = edc[0]
    if total <= 0.0:
        raise RirError("RIR has zero energy")
    with np.errstate(divide="ignore"):
        curve = 10.0 * np.log10(edc / total)
    return np.maximum(curve, DB_FLOOR)


def estimate_rt60(
    rir: RoomImpulseResponse,
    fit_range_db: tuple[float, float] = DEFAULT_FIT_RANGE_DB,
) -> float:
    """RT60 in seconds from a line fit to the Schroeder decay curve.

    Fits between the first crossings of the fit range bounds (default -5 and
    -35 dB) and extrapolates the fitted line to a 60 dB drop.
    """
    hi_db, lo_db = fit_range_db
    if not lo_db < hi_db < 0:
        raise ValueError(f"fit range must satisfy low < high < 0 dB, got {fit_range_db}")
    curve = schroeder_decay(rir)
    below_hi = np.nonzero(curve <= hi_db)[0]
    below_lo = np.nonzero(curve <= lo_db)[0]
    if len(below_lo) == 0:
        raise InsufficientDecayError(
            f"decay curve never reaches {lo_db} dB (min {curve.min():.1f} dB)"
        )
    start, end = below_hi[0], below_lo[0]
    if end - start < 2:
        raise InsufficientDecayError(
            f"fewer than 3 samples between the {hi_db} and {lo_db} dB crossings"
        )
    t = np.arange(start, end + 1) / rir.sample_rate_hz
    slope, _ = np.polyfit(t, curve[start : end + 1], 1)
    if slope >= 0:
        raise InsufficientDecayError("decay curve is not decreasing over the fit range")
    return float(-60.0 / slope)


def analyze_rir(
    rir: RoomImpulseResponse,
    fit_range_db: tuple[float, float] = DEFAULT_FIT_RANGE_DB,
    anchor: str = "zero",
) -> RirMetrics:
    return RirMetrics(
        rt60_s=estimate_rt60(rir, fit_range_db),
        drr_db=compute_drr(rir, anchor),
        direct_window=direct_path_window(rir, anchor),
    )


# --- RIR ingestion: WAV plus a key=value sidecar ---------------------------
#
# Sidecar format (same basename as the WAV, .meta extension): one `key = value`
# pair per line, '#' comments allowed. Recognized keys: room, channel,
# distance_m, dimensions_m (e.g. "5.0 x 6.4 x 2.9").

def parse_sidecar(text: str) -> dict:
    meta = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise RirError(f"sidecar line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        meta[key.lower()] = value
    return meta


def load_rir(wav_path, sidecar_path=None, channel: str | None = None) -> RoomImpulseResponse:
    """Load an RIR from a WAV file plus optional sidecar metadata.

    Stereo WAVs map channel "left" to 0 and "right" to 1; the sidecar's
    channel entry is used when no explicit channel is given.
    """
    meta: dict = {}
    if sidecar_path is not None:
        with open(sidecar_path, "r", encoding="utf-8") as fh:
            meta = parse_sidecar(fh.read())
    chan = (channel or meta.get("channel", "left")).lower()
    wav = load_wav(wav_path, channel={"left": 0, "right": 1}[chan] if chan in ("left", "right") else 0)
    dims: tuple[float, ...] = ()
    if "dimensions_m" in meta:
        dims = tuple(float(p) for p in meta["dimensions_m"].replace("x", " ").split())
    distance = float(meta["distance_m"]) if "distance_m" in meta else None
    return RoomImpulseResponse(
        wav.samples,
        wav.sample_rate_hz,
        channel=chan,
        room=meta.get("room", ""),
        distance_m=distance,
        dimensions_m=dims,
    )
