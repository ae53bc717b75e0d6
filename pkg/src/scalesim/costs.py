"""Cost functions used to bias scale generation.

Harmonicity
    Every interval is scored by the nearest high-harmonicity ratio: an
    interval takes the score of the highest-scoring ratio whose centre lies
    within half a window (w/2 cents).  The ratio score is
    (x + y - 1) / (x * y) * 100 for a reduced fraction x/y.
Imperfect fifths
    Fraction of intervals within w/2 of 702 cents.
Compressibility
    How well the adjacent intervals fit integer multiples of a common
    denominator gamma, searched over [min/2, 3*min/2].
"""

import bisect
import csv
import functools
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .core import _as_intervals
from .errors import CostDivisionByZero, InvalidRatio

MAX_DENOMINATOR = 64
BUCKET_SPAN = 2400
FAMILY_FORMS = ("C1", "C2", "C3", "C4")

# Normalisation constants (H_min, H_max) for w=20, I_min=80, keyed by N.
HAR_NORMALIZATION = {
    4: (14.0, 43.98),
    5: (15.0, 41.67),
    6: (16.0, 39.47),
    7: (17.0, 37.57),
    8: (18.0, 35.58),
    9: (18.0, 31.84),
}


def harmonic_score(x: int, y: int) -> float:
    """Harmonic similarity of the ratio x/y, in percent."""
    if y < 1 or x < y:
        raise InvalidRatio(f"need x >= y >= 1, got {x}/{y}")
    if math.gcd(x, y) != 1:
        raise InvalidRatio(f"{x}/{y} is not in lowest terms")
    return (x + y - 1) / (x * y) * 100.0


def ratio_cents(x: int, y: int) -> float:
    return 1200.0 * math.log2(x / y)


@dataclass(frozen=True)
class Window:
    x: int
    y: int
    center: float
    score: float
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    @property
    def width(self) -> float:
        return self.hi - self.lo


class HarmonicityTemplate:
    """Non-overlapping scoring windows for a maximum window size ``w``.

    Build with :func:`build_template`.  ``windows`` is sorted by centre.
    """

    def __init__(self, w: float, windows, centers, center_scores, center_priority):
        self.w = float(w)
        self.windows = tuple(windows)
        lo = np.array([win.lo for win in self.windows])
        hi = np.array([win.hi for win in self.windows])
        self._pack = (
            np.ascontiguousarray(centers, dtype=np.float64),
            np.ascontiguousarray(center_scores, dtype=np.float64),
            np.ascontiguousarray(center_priority, dtype=np.int64),
            lo,
            hi,
            np.array([win.lo_closed for win in self.windows], dtype=np.bool_),
            np.array([win.hi_closed for win in self.windows], dtype=np.bool_),
            np.array([win.score for win in self.windows]),
            self.w / 2.0,
            # first candidate window for each whole cent 0..BUCKET_SPAN
            np.searchsorted(hi, np.arange(BUCKET_SPAN + 1, dtype=np.float64)).astype(np.int64),
        )
        for arr in self._pack[:8] + self._pack[9:]:
            arr.setflags(write=False)

    @property
    def pack(self):
        """Array bundle consumed by the kernels."""
        return self._pack

    def score(self, cents):
        """Score of each value in ``cents`` (scalar or array)."""
        out = kernels.template_scores(np.asarray(cents, dtype=np.float64), self._pack)
        return float(out) if np.ndim(cents) == 0 else out

    def window_index(self, cents) -> np.ndarray:
        """Index into ``windows`` for each value, or -1 outside every window."""
        _, _, _, lo, hi, lo_closed, hi_closed, _, _, _ = self._pack
        flat = np.asarray(cents, dtype=np.float64).reshape(-1)
        out = np.full(flat.shape[0], -1, dtype=np.int64)
        nwin = lo.shape[0]
        idx = np.searchsorted(hi, flat, side="left")
        for cand in (idx, idx + 1):
            ok = cand < nwin
            c = np.where(ok, cand, 0)
            above = (flat > lo[c]) | ((flat == lo[c]) & lo_closed[c])
            below = (flat < hi[c]) | ((flat == hi[c]) & hi_closed[c])
            hit = ok & above & below & (out < 0)
            out[hit] = c[hit]
        return out.reshape(np.shape(cents))

    def window_for(self, cents: float) -> Optional[Window]:
        for win in self.windows:
            above = cents > win.lo or (cents == win.lo and win.lo_closed)
            below = cents < win.hi or (cents == win.hi and win.hi_closed)
            if above and below:
                return win
        return None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["ratio_x", "ratio_y", "center_cents", "score", "lo_cents", "hi_cents"])
            for win in self.windows:
                wr.writerow([win.x, win.y, f"{win.center:.6f}", f"{win.score:.6f}",
                             f"{win.lo:.6f}", f"{win.hi:.6f}"])

    def __repr__(self):
        return f"HarmonicityTemplate(w={self.w}, windows={len(self.windows)})"


def _ratios(max_denominator):
    out = []
    for y in range(1, max_denominator + 1):
        for x in range(y, 2 * y + 1):
            if math.gcd(x, y) == 1:
                out.append((x, y))
    # placement order: score descending, then x*y, then cents
    out.sort(key=lambda r: (-harmonic_score(*r), r[0] * r[1], r[0] / r[1]))
    return out


@functools.lru_cache(maxsize=32)
def build_template(w: float, max_denominator: int = MAX_DENOMINATOR) -> HarmonicityTemplate:
    """Greedy window placement in order of decreasing harmonic score.

    Each ratio claims [c - w/2, c + w/2] minus whatever higher-priority
    windows already cover; a window that loses both ends is dropped.  Ends
    cut by an earlier window are open, so boundary points stay with the
    higher-scoring ratio.
    """
    if not (0 < w <= 100):
        raise ValueError(f"window size must be in (0, 100], got {w}")
    half = w / 2.0
    ratios = _ratios(max_denominator)
    centers = np.array([ratio_cents(x, y) for x, y in ratios])
    placed = []
    seen = []  # centres of every higher-priority ratio, sorted
    for (x, y), c in zip(ratios, centers):
        lo, hi = c - half, c + half
        lo_closed = hi_closed = True
        k = bisect.bisect_left(seen, c)
        if k > 0 and seen[k - 1] + half >= lo:
            lo, lo_closed = seen[k - 1] + half, False
        if k < len(seen) and seen[k] - half <= hi:
            hi, hi_closed = seen[k] - half, False
        seen.insert(k, c)
        if hi > lo:
            placed.append(Window(x, y, float(c), harmonic_score(x, y), float(lo), float(hi),
                                 lo_closed, hi_closed))
    placed.sort(key=lambda win: win.center)
    order = np.argsort(centers, kind="stable")
    scores = np.array([harmonic_score(x, y) for x, y in ratios])
    return HarmonicityTemplate(w, placed, centers[order], scores[order], order)


def _batch(intervals):
    arr = np.asarray(intervals, dtype=np.float64)
    if arr.ndim == 1:
        return _as_intervals(arr)[None, :], True
    return arr, False


def scale_harmonicity(intervals, template: HarmonicityTemplate, m: float = 1.0):
    """Mean of score**m / 100**(m-1) over all circular intervals.

    Accepts a single scale (1-D) or a batch (S, N); returns a float or an
    array accordingly.
    """
    arr, single = _batch(intervals)
    out = kernels.mean_harmonicity(arr, template.pack, float(m))
    return float(out[0]) if single else out


def cost_har(hbar, hmin: float, hmax: float):
    """Linear harmonicity cost: 1 at ``hmin``, 0 at ``hmax``; not clamped."""
    if not hmax > hmin:
        raise ValueError("hmax must exceed hmin")
    return 1.0 - (hbar - hmin) / (hmax - hmin)


def fifths_fraction(intervals, w: float):
    """Fraction of circular intervals within w/2 cents of 702."""
    arr, single = _batch(intervals)
    out = kernels.fifths_fraction(arr, float(w))
    return float(out[0]) if single else out


def cost_fif(fbar):
    return 1.0 / (1.0 + fbar)


def cost_fif_alt(fbar, N: int):
    return 1.0 - (N * fbar) ** 2


class TransCost(NamedTuple):
    cost: float
    gamma: float


def cost_trans(intervals, n: float = 2, rounding: str = "ceil"):
    """Deviation of the intervals from a compressible template.

    Minimises (1/N) * sum |round(I_i / gamma) - I_i / gamma| ** n over
    gamma in [min(I)/2, 3*min(I)/2].  ``rounding="ceil"`` takes the
    ceiling; ``"nearest"`` rounds to the nearest integer.  Returns
    ``(cost, gamma)`` for one scale, or two arrays for a batch.
    """
    if rounding not in ("ceil", "nearest"):
        raise ValueError("rounding must be 'ceil' or 'nearest'")
    if n < 1:
        raise ValueError("n must be >= 1")
    arr, single = _batch(intervals)
    # sorted rows make the floating-point sum independent of interval order
    cost, gamma = kernels.trans_cost(np.sort(arr, axis=1), float(n), rounding == "nearest")
    if single:
        return TransCost(float(cost[0]), float(gamma[0]))
    return cost, gamma


def cost_family(hbar, form: str, A: float, m: float = 1.0):
    """Alternative harmonicity costs.

    C1 = 1 - H/A,  C2 = 1/(A + H),  C3 = 1 - (H/A)**m,  C4 = 1/(A + H)**m
    """
    h = np.asarray(hbar, dtype=np.float64)
    if form == "C1":
        out = 1.0 - h / A
    elif form == "C3":
        out = 1.0 - (h / A) ** m
    elif form in ("C2", "C4"):
        denom = A + h
        if np.any(denom == 0):
            raise CostDivisionByZero(f"{form}: A + H is zero")
        out = 1.0 / denom if form == "C2" else 1.0 / denom ** m
    else:
        raise ValueError(f"unknown cost form {form!r}; expected one of {FAMILY_FORMS}")
    return float(out) if np.ndim(hbar) == 0 else out


@dataclass(frozen=True)
class CostParams:
    w: float = 20.0
    n: float = 2
    m: float = 1.0
    Hmin: Optional[float] = None
    Hmax: Optional[float] = None
    family: Optional[str] = None
    A: Optional[float] = None
    m_fam: float = 1.0

    def __post_init__(self):
        if self.w <= 0:
            raise ValueError("w must be positive")
        if self.Hmin is not None and self.Hmax is not None and not self.Hmax > self.Hmin:
            raise ValueError("Hmax must exceed Hmin")
        if self.family is not None and self.family not in FAMILY_FORMS:
            raise ValueError(f"family must be one of {FAMILY_FORMS}")
