"""Hot numeric kernels with two interchangeable backends.

The numba backend is used when numba imports cleanly and the environment
variable ``SCALESIM_BACKEND`` is unset or ``"numba"``.  Setting
``SCALESIM_BACKEND=numpy`` forces the vectorized pure-numpy path.  Both
backends expose the same functions with the same signatures:

    circular_intervals(intervals)                 -> (S, N*(N-1))
    template_scores(values, centers, scores, priority, lo, hi,
                    lo_closed, hi_closed, half_width) -> same shape as values
    mean_harmonicity(intervals, ..., m)           -> (S,)
    fifths_fraction(intervals, w)                 -> (S,)
    trans_cost(intervals, n, nearest)             -> (S,), (S,)
    kde_on_grid(samples, grid, bandwidth)         -> (G,)
    found_flags(db_notes, pop_notes, tol)         -> (D,) bool
    pairwise_min_distance(padded, lengths)        -> (D, D)

Template lookups in both backends go through the truncated window table
held in the template's ``pack``.
"""

import logging
import os

from . import _numpy as numpy_backend

log = logging.getLogger(__name__)

numba_backend = None
try:
    from . import _numba as numba_backend
except ImportError:  # pragma: no cover - numba is a declared dependency
    log.debug("numba not importable; numpy kernels only")

_requested = os.environ.get("SCALESIM_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"SCALESIM_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numba" and numba_backend is not None:
    BACKEND = "numba"
    _impl = numba_backend
else:
    BACKEND = "numpy"
    _impl = numpy_backend

circular_intervals = _impl.circular_intervals
template_scores = _impl.template_scores
mean_harmonicity = _impl.mean_harmonicity
fifths_fraction = _impl.fifths_fraction
trans_cost = _impl.trans_cost
kde_on_grid = _impl.kde_on_grid
found_flags = _impl.found_flags
pairwise_min_distance = _impl.pairwise_min_distance

__all__ = [
    "BACKEND",
    "numpy_backend",
    "numba_backend",
    "circular_intervals",
    "template_scores",
    "mean_harmonicity",
    "fifths_fraction",
    "trans_cost",
    "kde_on_grid",
    "found_flags",
    "pairwise_min_distance",
]
