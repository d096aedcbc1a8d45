# Compiled implementations of the hot kernels. Mirrors _kernels_np exactly;
# tests assert parity between the two backends.

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, floor, sin, M_PI

cnp.import_array()

BACKEND = "cython"


cdef inline double _sinc(double x) noexcept nogil:
    if x == 0.0:
        return 1.0
    cdef double px = M_PI * x
    return sin(px) / px


def resample_sinc(x, double ratio, Py_ssize_t n_out, int taps):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xc = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n_out, dtype=np.float64)
    cdef const double[:] xv = xc
    cdef double[:] ov = out
    cdef Py_ssize_t n_in = xc.shape[0]
    cdef int half = taps // 2
    cdef double cutoff = 1.0 / ratio
    if cutoff > 1.0:
        cutoff = 1.0
    cdef Py_ssize_t n, base, k
    cdef int j
    cdef double pos, acc, d, u, win
    with nogil:
        for n in range(n_out):
            pos = n * ratio
            base = <Py_ssize_t>floor(pos) - half + 1
            acc = 0.0
            for j in range(taps):
                k = base + j
                if k < 0 or k >= n_in:
                    continue
                d = pos - k
                u = d / half
                if u > 1.0 or u < -1.0:
                    continue
                win = 0.42 + 0.5 * cos(M_PI * u) + 0.08 * cos(2.0 * M_PI * u)
                acc += xv[k] * cutoff * _sinc(cutoff * d) * win
            ov[n] = acc
    return out


def synth_sines(envelopes, centers_hz, phases, Py_ssize_t hop, double fs, bint hold):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] env = np.ascontiguousarray(envelopes, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cen = np.ascontiguousarray(centers_hz, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ph = np.ascontiguousarray(phases, dtype=np.float64)
    cdef Py_ssize_t n_ch = env.shape[0]
    cdef Py_ssize_t n_cyc = env.shape[1]
    cdef Py_ssize_t n = n_cyc * hop
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n, dtype=np.float64)
    cdef const double[:, :] ev = env
    cdef double[:] ov = out
    cdef const double[:] cv = cen
    cdef const double[:] pv = ph
    cdef Py_ssize_t c, t, k
    cdef double omega, amp, frac, a0, a1
    with nogil:
        for c in range(n_ch):
            omega = 2.0 * M_PI * cv[c] / fs
            for t in range(n):
                k = t // hop
                if hold:
                    amp = ev[c, k]
                elif k >= n_cyc - 1:
                    amp = ev[c, n_cyc - 1]
                else:
                    frac = (t - k * hop) / <double>hop
                    a0 = ev[c, k]
                    a1 = ev[c, k + 1]
                    amp = a0 + (a1 - a0) * frac
                ov[t] += amp * sin(omega * t + pv[c])
    return out


def top_n_mask(envelopes, int n):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] env = np.ascontiguousarray(envelopes, dtype=np.float64)
    cdef Py_ssize_t n_rows = env.shape[0]
    cdef Py_ssize_t n_cols = env.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2, cast=True] mask = np.zeros(
        (n_rows, n_cols), dtype=np.bool_
    )
    cdef const double[:, :] ev = env
    cdef cnp.uint8_t[:, :] mv = mask
    cdef Py_ssize_t r, c, best, picked
    cdef double best_val
    with nogil:
        for r in range(n_rows):
            for picked in range(n):
                best = -1
                best_val = 0.0
                for c in range(n_cols):
                    if mv[r, c]:
                        continue
                    # strict > keeps the lowest index among ties
                    if best < 0 or ev[r, c] > best_val:
                        best = c
                        best_val = ev[r, c]
                mv[r, best] = 1
    return mask
