"""Numerical kernels with a compiled core and a pure-python fallback.

The hot loops (cyclic coordinate descent for penalized weighted least
squares, exhaustive split scans for regression trees) are implemented
twice with identical contracts: once in Cython (``_core``) and once in
numpy (``_fallback``). The compiled module is preferred at import time;
set ``SURVHTE_PURE_PYTHON=1`` to force the fallback, e.g. to benchmark
one against the other.
"""

import os

if os.environ.get("SURVHTE_PURE_PYTHON", "") not in ("", "0"):
    from . import _fallback as _impl

    BACKEND = "fallback"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _fallback as _impl

        BACKEND = "fallback"

enet_cd = _impl.enet_cd
best_split = _impl.best_split


def backend_name() -> str:
    """Name of the active kernel backend: 'compiled' or 'fallback'."""
    return BACKEND


__all__ = ["enet_cd", "best_split", "backend_name", "BACKEND"]
