"""Kernel backend selection.

The compiled extension is preferred when present; the pure-Python reference
is the fallback. Set TRAJAUDIT_PURE_PYTHON=1 to force the fallback (used by
the cross-backend tests and the benchmark).
"""
from __future__ import annotations

import os

from . import pyref

if os.environ.get("TRAJAUDIT_PURE_PYTHON"):
    impl = pyref
else:
    try:
        from . import _native as impl  # type: ignore[no-redef]
    except ImportError:
        impl = pyref

BACKEND: str = impl.BACKEND_NAME


def backends() -> dict:
    """All importable backends by name (for tests and benchmarks)."""
    found = {pyref.BACKEND_NAME: pyref}
    try:
        from . import _native

        found[_native.BACKEND_NAME] = _native
    except ImportError:
        pass
    return found
