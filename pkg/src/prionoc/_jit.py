"""Optional numba acceleration.

Set ``PRIONOC_DISABLE_NUMBA=1`` (before import) to run every kernel as
plain Python over numpy arrays. The decorated functions are written in
the numba-compatible subset either way, so both paths execute the same
code.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

DISABLED = os.environ.get("PRIONOC_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")
ENABLED = numba is not None and not DISABLED


def optional_njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity otherwise."""
    kwargs.setdefault("cache", True)

    def decorator(func):
        if ENABLED:
            return numba.njit(*args, **kwargs)(func)
        return func

    return decorator
