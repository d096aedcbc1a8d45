"""Benchmark the compiled kernels against the numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Workloads mirror batch stimulus generation: windowed-sinc resampling of a
3 s recording, per-cycle channel selection, and sine-carrier synthesis for
a 3 s electrodogram, plus the full vocoder chain under each backend.
"""

import argparse
import importlib
import os
import time

import numpy as np


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    from earbench import _kernels_np as numpy_backend

    backends = [("numpy", numpy_backend)]
    try:
        from earbench import _kernels_c as cython_backend

        backends.append(("cython", cython_backend))
    except ImportError:
        print("compiled backend not built; benchmarking numpy only")

    rng = np.random.default_rng(0)
    speech_48k = rng.normal(size=3 * 48000)
    envelopes = rng.random((22, 1500))  # 3 s of 2 ms cycles
    centers = np.linspace(250, 7700, 22)
    phases = np.zeros(22)
    frames_env = rng.random((1500, 22))

    rows = []
    for name, mod in backends:
        t_res = timeit(lambda: mod.resample_sinc(speech_48k, 3.0, 48000, 64), args.repeat)
        t_sel = timeit(lambda: mod.top_n_mask(frames_env, 8), args.repeat)
        t_syn = timeit(
            lambda: mod.synth_sines(envelopes, centers, phases, 32, 16000.0, False),
            args.repeat,
        )
        rows.append((name, t_res, t_sel, t_syn))

    print(f"{'backend':<8} {'resample_sinc':>14} {'top_n_mask':>12} {'synth_sines':>12}")
    for name, t_res, t_sel, t_syn in rows:
        print(f"{name:<8} {t_res * 1e3:>12.2f}ms {t_sel * 1e3:>10.2f}ms {t_syn * 1e3:>10.2f}ms")
    if len(rows) == 2:
        print(
            f"{'speedup':<8} {rows[0][1] / rows[1][1]:>13.2f}x "
            f"{rows[0][2] / rows[1][2]:>11.2f}x {rows[0][3] / rows[1][3]:>11.2f}x"
        )

    # end-to-end vocode under each backend (forces a fresh kernel selection)
    from earbench.signal import Waveform

    speech = Waveform(np.tanh(rng.normal(size=3 * 16000)) * 0.3, 16000)
    print()
    for name, _ in backends:
        os.environ["EARBENCH_FORCE_NUMPY"] = "1" if name == "numpy" else ""
        import earbench.kernels
        import earbench.signal
        import earbench.vocoder

        importlib.reload(earbench.kernels)
        importlib.reload(earbench.signal)
        importlib.reload(earbench.vocoder)
        cfg = earbench.vocoder.VocoderConfig()
        t = timeit(lambda: earbench.vocoder.vocode(speech, cfg, 0.08), args.repeat)
        print(f"vocode 3 s sentence [{name:<6}]: {t * 1e3:.1f} ms")
    os.environ.pop("EARBENCH_FORCE_NUMPY", None)


if __name__ == "__main__":
    main()
