"""Select the kernel backend at import time.

``PQSTEER_BACKEND`` may be ``auto`` (default), ``compiled`` or ``python``.
"""
import logging
import os

log = logging.getLogger(__name__)

_choice = os.environ.get("PQSTEER_BACKEND", "auto").lower()
if _choice not in ("auto", "compiled", "python"):
    raise ImportError(f"PQSTEER_BACKEND must be auto, compiled or python, got {_choice!r}")

if _choice == "python":
    from . import _pykernel as kernel
else:
    try:
        from . import _ckernel as kernel
    except ImportError:
        if _choice == "compiled":
            raise
        log.debug("compiled kernel unavailable, using numpy fallback")
        from . import _pykernel as kernel

BACKEND = kernel.NAME


def available_backends():
    """Every importable kernel module, compiled first."""
    mods = []
    try:
        from . import _ckernel
        mods.append(_ckernel)
    except ImportError:
        pass
    from . import _pykernel
    mods.append(_pykernel)
    return mods
