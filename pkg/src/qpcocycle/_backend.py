"""Backend selection for the hot kernels.

Numba is used when it imports cleanly and ``QPCOCYCLE_DISABLE_NUMBA`` is not
set to a truthy value; otherwise the vectorised numpy fallback is used.
"""

import os

_FALSY = {"", "0", "false", "no", "off"}


def _numba_disabled():
    return os.environ.get("QPCOCYCLE_DISABLE_NUMBA", "").strip().lower() not in _FALSY


try:
    import numba  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not _numba_disabled()
BACKEND_NAME = "numba" if USE_NUMBA else "numpy"


class _Counter:
    """Counts dispatches into numerical kernels (used by the CLI cache tests)."""

    def __init__(self):
        self.calls = 0

    def bump(self):
        self.calls += 1

    def reset(self):
        self.calls = 0


kernel_counter = _Counter()
