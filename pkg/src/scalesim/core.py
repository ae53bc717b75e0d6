"""Scale representation, cents arithmetic and similarity matching.

All quantities are in cents (1200 per octave).  A scale is described by its
adjacent intervals; its notes are the cumulative sums starting at 0, so a
scale of N intervals has N + 1 notes, the last one being its octave.
"""

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .errors import InvalidScale

OCTAVE = 1200.0
DEFAULT_TOLERANCE = 10.0


def _as_intervals(intervals) -> np.ndarray:
    arr = np.asarray(intervals, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidScale("a scale needs a non-empty 1-D list of intervals")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise InvalidScale(f"intervals must be finite and positive: {arr.tolist()}")
    return arr


def notes_from_intervals(intervals) -> np.ndarray:
    """Notes of a scale in cents, starting at 0 and ending on the octave.

    >>> notes_from_intervals([200, 200, 100, 200, 200, 200, 100]).tolist()
    [0.0, 200.0, 400.0, 500.0, 700.0, 900.0, 1100.0, 1200.0]
    """
    arr = _as_intervals(intervals)
    out = np.empty(arr.size + 1)
    out[0] = 0.0
    np.cumsum(arr, out=out[1:])
    return out


def intervals_from_notes(notes) -> np.ndarray:
    """Inverse of :func:`notes_from_intervals`; notes must start at 0."""
    arr = np.asarray(notes, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise InvalidScale("need at least two notes")
    if arr[0] != 0.0:
        raise InvalidScale("first note must be 0")
    steps = np.diff(arr)
    if np.any(steps <= 0):
        raise InvalidScale("notes must be strictly increasing")
    return steps


def circular_intervals(intervals) -> np.ndarray:
    """All N(N-1) intervals between scale degrees, wrapping past the octave.

    Ordered by starting note i = 0..N-1, then by span 1..N-1 steps.  The
    interval from note i to note j >= N wraps through the scale's octave,
    so unison and octave are never included.
    """
    arr = _as_intervals(intervals)
    if arr.size < 2:
        return np.empty(0)
    return kernels.circular_intervals(arr[None, :])[0]


def scales_similar(a, b, tol: float = DEFAULT_TOLERANCE) -> bool:
    """True when every pair of corresponding notes differs by at most ``tol``.

    ``a`` and ``b`` are note lists (starting at 0, octave included).  The
    octave note takes part in the comparison, so a scale whose octave is
    off by more than ``tol`` never matches a 1200-cent scale.  Scales with
    different lengths are never similar.
    """
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        return False
    return bool(np.all(np.abs(a - b) <= tol))


@dataclass(frozen=True)
class ScaleRecord:
    """One empirical scale with its provenance."""

    id: str
    name: str
    culture: str
    region: str
    source_kind: str
    adjacent_intervals: tuple
    tuning: str = ""

    def __post_init__(self):
        if self.source_kind not in ("Theory", "Measured"):
            raise InvalidScale(f"source_kind must be Theory or Measured, got {self.source_kind!r}")
        arr = _as_intervals(self.adjacent_intervals)
        object.__setattr__(self, "adjacent_intervals", tuple(float(v) for v in arr))

    @property
    def N(self) -> int:
        return len(self.adjacent_intervals)

    @property
    def intervals(self) -> np.ndarray:
        return np.array(self.adjacent_intervals)

    @property
    def notes(self) -> np.ndarray:
        return notes_from_intervals(self.adjacent_intervals)

    @property
    def octave(self) -> float:
        return float(sum(self.adjacent_intervals))


@dataclass(frozen=True)
class GeneratedScale:
    adjacent_intervals: tuple
    costs: Optional[Mapping[str, float]] = field(default=None, compare=False)

    @property
    def N(self) -> int:
        return len(self.adjacent_intervals)

    @property
    def notes(self) -> np.ndarray:
        return notes_from_intervals(self.adjacent_intervals)


class Population:
    """Array-backed collection of generated scales of one size N.

    ``intervals`` has shape (S, N); ``costs`` maps a cost name to an array
    of length S.
    """

    def __init__(self, intervals, costs: Optional[Mapping[str, np.ndarray]] = None):
        arr = np.asarray(intervals, dtype=np.float64)
        if arr.ndim != 2:
            raise InvalidScale("population intervals must be 2-D (S, N)")
        arr.setflags(write=False)
        self.intervals = arr
        self.costs = {}
        for name, vals in (costs or {}).items():
            v = np.asarray(vals, dtype=np.float64)
            if v.shape != (arr.shape[0],):
                raise ValueError(f"cost column {name!r} has shape {v.shape}")
            v.setflags(write=False)
            self.costs[name] = v

    @property
    def N(self) -> int:
        return self.intervals.shape[1]

    def __len__(self):
        return self.intervals.shape[0]

    def __getitem__(self, i) -> GeneratedScale:
        costs = {k: float(v[i]) for k, v in self.costs.items()} or None
        return GeneratedScale(tuple(self.intervals[i].tolist()), costs)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def notes(self) -> np.ndarray:
        out = np.zeros((len(self), self.N + 1))
        np.cumsum(self.intervals, axis=1, out=out[:, 1:])
        return out

    def circular_intervals(self) -> np.ndarray:
        return kernels.circular_intervals(self.intervals)

    def take(self, idx) -> "Population":
        return Population(self.intervals[idx], {k: v[idx] for k, v in self.costs.items()})

    @classmethod
    def concat(cls, parts: Sequence["Population"], n: int) -> "Population":
        if not parts:
            return cls(np.empty((0, n)))
        names = list(parts[0].costs)
        return cls(np.concatenate([p.intervals for p in parts]),
                   {k: np.concatenate([p.costs[k] for p in parts]) for k in names})


def notes_matrix(scales: Sequence) -> np.ndarray:
    """Stack the notes of equal-N scales (records or interval lists)."""
    rows = []
    for sc in scales:
        iv = sc.adjacent_intervals if hasattr(sc, "adjacent_intervals") else sc
        rows.append(notes_from_intervals(iv))
    if not rows:
        return np.empty((0, 0))
    return np.vstack(rows)
