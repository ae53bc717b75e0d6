"""Distribution estimates and two-sample comparisons."""

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import stats as _sps

from . import kernels
from .errors import DegenerateSample, GridMismatch

INTERVAL_GRID = np.arange(0.0, 1201.0)
NOTE_BIN = 30.0
NOTE_TRUNCATION = (15.0, 1185.0)


@dataclass(frozen=True)
class DistributionEstimate:
    """Probability mass on a strictly increasing grid.

    For histograms ``grid`` holds the bin centres and ``edges`` the bin
    edges; for KDEs ``edges`` is None.
    """

    kind: str
    grid: np.ndarray
    mass: np.ndarray
    edges: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("Histogram", "KDE"):
            raise ValueError("kind must be Histogram or KDE")
        g = np.asarray(self.grid, dtype=np.float64)
        m = np.asarray(self.mass, dtype=np.float64)
        if g.ndim != 1 or g.shape != m.shape:
            raise ValueError("grid and mass must be 1-D and the same length")
        if g.size > 1 and np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-9:
            raise ValueError("mass must be non-negative and sum to 1")
        for a in (g, m):
            a.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "mass", m)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("grid_cents,mass\n")
            for x, p in zip(self.grid, self.mass):
                fh.write(f"{x:.6f},{p:.12g}\n")


def _samples(x, at_least=1):
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size < at_least:
        raise DegenerateSample(f"need at least {at_least} samples, got {arr.size}")
    return arr


def silverman_bandwidth(samples) -> float:
    """1.06 * sd * n**(-1/5)."""
    x = _samples(samples, 2)
    sd = x.std(ddof=1)
    if not sd > 0:
        raise DegenerateSample("samples have zero variance")
    return 1.06 * sd * x.size ** -0.2


def kde(samples, grid=INTERVAL_GRID, bandwidth: Optional[float] = None) -> DistributionEstimate:
    """Gaussian KDE evaluated on ``grid`` and normalised over the grid."""
    x = _samples(samples, 2)
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    g = np.asarray(grid, dtype=np.float64)
    dens = kernels.kde_on_grid(np.sort(x), g, h)
    total = dens.sum()
    if not total > 0:
        raise DegenerateSample("density vanishes on the grid")
    return DistributionEstimate("KDE", g, dens / total)


def histogram(samples, edges) -> DistributionEstimate:
    """Normalised histogram; samples outside the edges are dropped."""
    x = _samples(samples)
    e = np.asarray(edges, dtype=np.float64)
    counts, _ = np.histogram(x, bins=e)
    total = counts.sum()
    if total == 0:
        raise DegenerateSample("no samples fall inside the histogram range")
    return DistributionEstimate("Histogram", 0.5 * (e[1:] + e[:-1]), counts / total, e)


def note_edges(bin_size: float = NOTE_BIN, lo: float = NOTE_TRUNCATION[0],
               hi: float = NOTE_TRUNCATION[1]) -> np.ndarray:
    """Bin edges for note distributions, truncated to [lo, hi]."""
    return np.arange(lo, hi + 0.5 * bin_size, bin_size)


def jsd(p: DistributionEstimate, q: DistributionEstimate) -> float:
    """Jensen-Shannon divergence in bits, so it lies in [0, 1]."""
    pg, qg = np.asarray(p.grid), np.asarray(q.grid)
    if pg.shape != qg.shape or not np.array_equal(pg, qg):
        raise GridMismatch("distributions are on different grids")
    return jsd_mass(p.mass, q.mass)


def jsd_mass(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise GridMismatch("mass vectors differ in length")
    m = 0.5 * (p + q)

    def kl(a):
        # a subnormal mass can halve to zero in m; its term is below 1e-300
        nz = (a > 0) & (m > 0)
        return float(np.sum(a[nz] * np.log2(a[nz] / m[nz])))

    # symmetric by construction: the two terms are summed in a fixed order
    a, b = kl(p), kl(q)
    return max(0.0, 0.5 * (min(a, b) + max(a, b)))


def cvm_two_sample(x, y) -> float:
    """Two-sample Cramer-von Mises statistic.

    T = nm/(n+m)**2 * sum over the pooled sample of (F_n - G_m)**2.
    """
    x = np.sort(_samples(x))
    y = np.sort(_samples(y))
    n, m = x.size, y.size
    pooled = np.concatenate([x, y])
    fx = np.searchsorted(x, pooled, side="right") / n
    gy = np.searchsorted(y, pooled, side="right") / m
    return float(n * m / (n + m) ** 2 * np.sum((fx - gy) ** 2))


def cvm_rank_form(x, y) -> float:
    """Rank-based form of the statistic (equal to the EDF form without ties)."""
    x = _samples(x)
    y = _samples(y)
    n, m = x.size, y.size
    ranks = _sps.rankdata(np.concatenate([x, y]))
    r = np.sort(ranks[:n])
    s = np.sort(ranks[n:])
    i = np.arange(1, n + 1)
    j = np.arange(1, m + 1)
    u = n * np.sum((r - i) ** 2) + m * np.sum((s - j) ** 2)
    return float(u / (n * m * (n + m)) - (4 * m * n - 1) / (6 * (m + n)))


class ConfidenceInterval(NamedTuple):
    lo: float
    hi: float
    mean: float


def bootstrap_ci(samples, stat: Callable = np.mean, n_resamples: int = 1000,
                 level: float = 0.95, seed: int = 0) -> ConfidenceInterval:
    """Percentile bootstrap interval; ``mean`` is the mean of the replicates.

    Resample ``k`` draws from its own stream keyed by ``(seed, k)``, so a
    run with more resamples extends a shorter one with the same seed.
    """
    x = np.asarray(samples)
    if x.shape[0] == 0:
        raise DegenerateSample("bootstrap needs a nonempty sample")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    n = x.shape[0]
    reps = np.empty(n_resamples)
    for k in range(n_resamples):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        reps[k] = stat(x[rng.integers(0, n, n)])
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(reps, [alpha, 1.0 - alpha])
    return ConfidenceInterval(float(lo), float(hi), float(reps.mean()))


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and equal length")
    if x.size < 3:
        raise DegenerateSample("need at least 3 points")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt(np.dot(dx, dx)), math.sqrt(np.dot(dy, dy))
    if sx == 0 or sy == 0:
        raise DegenerateSample("zero variance")
    return float(np.clip(np.dot(dx, dy) / (sx * sy), -1.0, 1.0))


def spearman(x, y) -> float:
    """Pearson correlation of average ranks."""
    return pearson(_sps.rankdata(x), _sps.rankdata(y))


def weighted_mean(values, weights) -> float:
    """Mean weighted by e.g. per-N sample sizes."""
    v = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if v.shape != w.shape or w.sum() <= 0 or np.any(w < 0):
        raise ValueError("weights must be non-negative, nonzero and match values")
    return float(np.dot(v, w) / w.sum())
