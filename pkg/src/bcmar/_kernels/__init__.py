"""Kernel backend selection.

The compiled extension (``_core``, built from Cython) and the pure-Python
module (``pure``) implement the same functions with identical arithmetic.
The compiled one is preferred when importable; set ``BCMAR_BACKEND=pure`` or
``BCMAR_BACKEND=compiled`` to force a choice (forcing ``compiled`` raises if
the extension is missing).
"""

import os

_requested = os.environ.get("BCMAR_BACKEND", "auto").strip().lower()

if _requested in ("auto", "", "compiled", "cy", "c"):
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        if _requested not in ("auto", ""):
            raise
        from . import pure as _impl

        BACKEND = "pure"
elif _requested in ("pure", "py", "python"):
    from . import pure as _impl

    BACKEND = "pure"
else:
    raise ValueError(f"unknown BCMAR_BACKEND value: {_requested!r}")

STATUS_OK = _impl.STATUS_OK
STATUS_DEGENERATE_START = _impl.STATUS_DEGENERATE_START
STATUS_DEGENERATE_RUN = _impl.STATUS_DEGENERATE_RUN

loglik_multinomial = _impl.loglik_multinomial
em_multinomial = _impl.em_multinomial
e_step = _impl.e_step
