"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
numerically interchangeable. Set CHFDIST_BACKEND=c or =python to force one
(forcing "c" raises if the extension is missing).
"""

import os

from . import _kernels_py

_requested = os.environ.get("CHFDIST_BACKEND", "").strip().lower()

if _requested not in ("", "c", "python"):
    raise ValueError(
        f"CHFDIST_BACKEND must be 'c' or 'python', got {_requested!r}"
    )

if _requested == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "c"
    except ImportError:
        if _requested == "c":
            raise
        _impl = _kernels_py
        BACKEND = "python"

convolve_full = _impl.convolve_full
compensated_complex_sum = _impl.compensated_complex_sum
