"""Optional numba acceleration.

Hot kernels are written twice: a numba ``@njit`` loop version and a
vectorised numpy version.  ``TSUNAMISENSE_NUMBA=0`` (or a missing numba
install) selects the numpy path.
"""

import os

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


ENV_FLAG = "TSUNAMISENSE_NUMBA"


def numba_enabled():
    """True when the numba kernels should be used for this call."""
    if not HAS_NUMBA:
        return False
    return os.environ.get(ENV_FLAG, "1").strip().lower() not in ("0", "false", "no", "off")
