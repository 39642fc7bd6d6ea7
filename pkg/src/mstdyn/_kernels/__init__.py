"""Hot-kernel backend selection.

Imports the compiled extension when present, otherwise falls back to the
pure-Python implementation. MSTDYN_PURE_PYTHON=1 forces the fallback
(useful for benchmarking and for testing backend equivalence).
"""

import os

if os.environ.get("MSTDYN_PURE_PYTHON", "") not in ("", "0"):
    from . import _pure as _impl
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _pure as _impl  # type: ignore[no-redef]

BACKEND = _impl.BACKEND
argsort_edges = _impl.argsort_edges
kruskal_select = _impl.kruskal_select
ladder_visits = _impl.ladder_visits

__all__ = ["BACKEND", "argsort_edges", "kruskal_select", "ladder_visits"]
