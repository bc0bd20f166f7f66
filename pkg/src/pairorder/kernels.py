"""Backend selection for the hot kernels.

Set ``ORD_NUMBA=0`` before import to force the pure-numpy fallback,
``ORD_NUMBA=1`` to require numba (import error if missing).  The default
("auto") uses numba when it imports cleanly.  Both backends are
bit-compatible; see ``benchmarks/bench_kernels.py`` for the speed gap.
"""

from __future__ import annotations

import os

from pairorder import _kernels_np

_flag = os.environ.get("ORD_NUMBA", "auto").strip().lower()

if _flag in ("0", "false", "no", "off"):
    _impl = _kernels_np
    BACKEND = "numpy"
elif _flag in ("1", "true", "yes", "on"):
    from pairorder import _kernels_nb as _impl

    BACKEND = "numba"
else:
    try:
        from pairorder import _kernels_nb as _impl

        BACKEND = "numba"
    except ImportError:
        _impl = _kernels_np
        BACKEND = "numpy"

inversion_count = _impl.inversion_count
pairwise_hits = _impl.pairwise_hits
score_full = _impl.score_full
exhaustive_best = _impl.exhaustive_best
beam_search = _impl.beam_search

__all__ = [
    "BACKEND",
    "inversion_count",
    "pairwise_hits",
    "score_full",
    "exhaustive_best",
    "beam_search",
]
