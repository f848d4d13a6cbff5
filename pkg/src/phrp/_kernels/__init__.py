"""Kernel backend selection.

The compiled extension (`phrp._kernels._fast`, built from Cython) is used
when available; otherwise the numpy fallback in `_pure` is selected.  Set
``PHRP_BACKEND=pure`` or ``PHRP_BACKEND=fast`` to force a choice (forcing
``fast`` raises if the extension was not built).
"""

from __future__ import annotations

import os

from . import _pure

_choice = os.environ.get("PHRP_BACKEND", "").strip().lower()
if _choice not in ("", "fast", "pure"):
    raise RuntimeError(f"PHRP_BACKEND must be 'fast' or 'pure', got {_choice!r}")

if _choice == "pure":
    _impl = _pure
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        if _choice == "fast":
            raise
        _impl = _pure

BACKEND = _impl.BACKEND_NAME
bf_rounds = _impl.bf_rounds
segment_logsumexp = _impl.segment_logsumexp
segment_sum = _impl.segment_sum


def available_backends() -> dict[str, object]:
    """Map of backend name to module, for benchmarking and equivalence tests."""
    out: dict[str, object] = {"pure": _pure}
    try:
        from . import _fast

        out["fast"] = _fast
    except ImportError:
        pass
    return out
