"""Optional jitted hot loop for the table-driven transform.

The table apply is a pure gather; numpy's fancy indexing materializes a
(K, C) intermediate that roughly doubles the memory traffic. When numba is
available the copy runs as one fused loop instead. Both paths produce
bit-identical output (they copy the same float32 values), so the fallback
is purely a speed difference.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _gather_rows_jit(out, src, offsets, cams, vs, us, lo, hi):
    n_chan = src.shape[1]
    for k in range(lo, hi):
        o = offsets[k]
        ci = cams[k]
        v = vs[k]
        u = us[k]
        for c in range(n_chan):
            out[o, c] = src[ci, c, v, u]


def gather_rows(out, src, offsets, cams, vs, us, lo: int, hi: int) -> None:
    """out[offsets[k]] = src[cams[k], :, vs[k], us[k]] for k in [lo, hi)."""
    if HAVE_NUMBA:
        _gather_rows_jit(out, src, offsets, cams, vs, us, lo, hi)
    else:
        sl = slice(lo, hi)
        out[offsets[sl]] = src[cams[sl], :, vs[sl], us[sl]]
