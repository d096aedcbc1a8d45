"""Numpy implementations of the hot kernels.

These are the reference implementations and the fallback used when the
compiled extension (_kernels_c) is unavailable. Signatures must stay in
lockstep with the Cython module; tests assert parity between the two.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"

_CHUNK = 8192  # output samples per resampler block, bounds the tap matrix size


def resample_sinc(x, ratio, n_out, taps):
    """Windowed-sinc resampling.

    ratio is source samples per output sample (src_rate / dst_rate); the
    kernel is a Blackman-windowed sinc of `taps` points with cutoff at the
    narrower of the two Nyquist limits.
    """
    x = np.asarray(x, dtype=np.float64)
    half = taps // 2
    cutoff = min(1.0, 1.0 / ratio)
    out = np.empty(n_out, dtype=np.float64)
    for start in range(0, n_out, _CHUNK):
        stop = min(start + _CHUNK, n_out)
        pos = np.arange(start, stop, dtype=np.float64) * ratio
        base = np.floor(pos).astype(np.int64) - half + 1
        k = base[:, None] + np.arange(taps)[None, :]
        d = pos[:, None] - k
        u = d / half
        win = 0.42 + 0.5 * np.cos(np.pi * u) + 0.08 * np.cos(2.0 * np.pi * u)
        win[np.abs(u) > 1.0] = 0.0
        w = cutoff * np.sinc(cutoff * d) * win
        valid = (k >= 0) & (k < len(x))
        xv = np.where(valid, x[np.clip(k, 0, len(x) - 1)], 0.0)
        out[start:stop] = np.sum(xv * np.where(valid, w, 0.0), axis=1)
    return out


def synth_sines(envelopes, centers_hz, phases, hop, fs, hold):
    """Sum of per-channel sinusoids amplitude-modulated by cycle envelopes.

    envelopes is (channels, cycles); cycle k is anchored at sample k*hop.
    With hold=False the envelope is linearly interpolated between anchors
    (held flat past the last anchor); hold=True uses zero-order hold.
    Output covers the analyzed span: cycles*hop samples.
    """
    env = np.asarray(envelopes, dtype=np.float64)
    n_ch, n_cyc = env.shape
    n = n_cyc * hop
    t = np.arange(n, dtype=np.float64)
    out = np.zeros(n, dtype=np.float64)
    anchors = np.arange(n_cyc, dtype=np.float64) * hop
    for c in range(n_ch):
        if hold:
            amp = env[c, np.minimum(t.astype(np.int64) // hop, n_cyc - 1)]
        else:
            amp = np.interp(t, anchors, env[c])
        out += amp * np.sin(2.0 * np.pi * centers_hz[c] / fs * t + phases[c])
    return out


def top_n_mask(envelopes, n):
    """Per-row boolean mask of the n largest entries; ties go to the lower index."""
    env = np.asarray(envelopes, dtype=np.float64)
    # stable argsort of -env keeps lower indices first among equal values
    order = np.argsort(-env, axis=1, kind="stable")
    mask = np.zeros(env.shape, dtype=bool)
    rows = np.arange(env.shape[0])[:, None]
    mask[rows, order[:, :n]] = True
    return mask
