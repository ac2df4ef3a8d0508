"""Kernel backend selection.

Imports the compiled extension when present, otherwise the pure-NumPy
fallback.  Setting ``OPOHERALD_PURE=1`` in the environment forces the
fallback (useful for parity tests and benchmarks).
"""

from __future__ import annotations

import os

if os.environ.get("OPOHERALD_PURE", "").strip() not in ("", "0"):
    from . import _tagfallback as _impl

    BACKEND = "python"
else:
    try:
        from . import _tagkernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build environment
        from . import _tagfallback as _impl

        BACKEND = "python"

correlate_into = _impl.correlate_into
dead_time_keep = _impl.dead_time_keep
