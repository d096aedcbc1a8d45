"""Kernel backend selection.

Imports the compiled extension when present, otherwise the numpy fallback.
Set EARBENCH_FORCE_NUMPY=1 to skip the extension (used by the benchmark and
for debugging parity issues).
"""

from __future__ import annotations

import os

from earbench import _kernels_np

if os.environ.get("EARBENCH_FORCE_NUMPY"):
    _impl = _kernels_np
else:
    try:
        from earbench import _kernels_c as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_np

BACKEND = _impl.BACKEND

resample_sinc = _impl.resample_sinc
synth_sines = _impl.synth_sines
top_n_mask = _impl.top_n_mask


def available_backends():
    """Names of the importable kernel backends."""
    names = [_kernels_np.BACKEND]
    try:
        from earbench import _kernels_c

        names.append(_kernels_c.BACKEND)
    except ImportError:
        pass
    return names
