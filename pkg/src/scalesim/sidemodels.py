"""Side models: vocal mistuning, harmonic-series prominence, and the
analytic acceptance/selectivity trade-off of alternative cost functions."""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp, ndtri

from . import costs as _costs
from .errors import AbortTooSelective, CostDivisionByZero, InvalidDensity, NoSolution
from .stats import DistributionEstimate, jsd

GL_NODES = 512
PROD_SPAN = 6.0  # production Gaussian integrated over +-6 sd
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_NODES)


@dataclass(frozen=True)
class ChannelParams:
    """Gaussian production and perception noise around a lattice of
    interval categories ``mu + k * spacing``, k = -n_flank..n_flank.

    ``n_flank=None`` picks enough categories to cover the production spread
    plus eight perception widths on each side (at least five).
    """

    sigma_prod: float
    sigma_per: float
    spacing: float
    n_flank: Optional[int] = None
    mu: float = 0.0

    def __post_init__(self):
        if not (self.sigma_prod > 0 and self.sigma_per > 0 and self.spacing > 0):
            raise ValueError("sigmas and spacing must be positive")
        if self.n_flank is not None and self.n_flank < 1:
            raise ValueError("n_flank must be >= 1")

    @property
    def flanks(self) -> int:
        if self.n_flank is not None:
            return self.n_flank
        reach = PROD_SPAN * self.sigma_prod + 8.0 * self.sigma_per
        return max(5, math.ceil(reach / self.spacing) + 1)

    @property
    def means(self) -> np.ndarray:
        k = np.arange(-self.flanks, self.flanks + 1)
        return self.mu + k * self.spacing


def category_prob(I, params: ChannelParams):
    """Probability that interval ``I`` is perceived as the centre category."""
    x = np.asarray(I, dtype=np.float64)
    logits = -((x[..., None] - params.means) ** 2) / (2.0 * params.sigma_per ** 2)
    centre = -((x - params.mu) ** 2) / (2.0 * params.sigma_per ** 2)
    out = np.exp(centre - logsumexp(logits, axis=-1))
    return float(out) if out.ndim == 0 else out


def transmission_accuracy(params: ChannelParams, nodes: int = GL_NODES) -> float:
    """Fraction of sung intervals heard as the intended category.

    Gauss-Legendre over +-6 sigma_prod, split at the category boundaries
    (midpoints between means) so that a sharp perceptual boundary always
    sits at a panel edge.  Each panel gets at least 64 nodes and the total
    is at least ``nodes``.
    """
    half = PROD_SPAN * params.sigma_prod
    a, b = params.mu - half, params.mu + half
    k = np.arange(-params.flanks - 1, params.flanks + 1)
    cuts = params.mu + (k + 0.5) * params.spacing
    cuts = np.concatenate([[a], cuts[(cuts > a) & (cuts < b)], [b]])
    per = max(64, -(-nodes // (cuts.size - 1)))
    gx, gw = _GL_X, _GL_W
    if per != GL_NODES:
        gx, gw = np.polynomial.legendre.leggauss(per)
    mid = 0.5 * (cuts[1:] + cuts[:-1])
    rad = 0.5 * (cuts[1:] - cuts[:-1])
    x = (mid[:, None] + rad[:, None] * gx).ravel()
    w = (rad[:, None] * gw).ravel()
    pdf = np.exp(-0.5 * ((x - params.mu) / params.sigma_prod) ** 2) / (
        params.sigma_prod * math.sqrt(2.0 * math.pi))
    return float(np.sum(w * pdf * category_prob(x, params)))


def min_interval_size(sigma_prod: float, sigma_per: float, target: float = 0.99,
                      lo: float = 1.0, hi: float = 1200.0) -> float:
    """Smallest category spacing in [lo, hi] whose transmission accuracy
    reaches ``target`` (accuracy rises monotonically with spacing)."""
    if not 0 < target < 1:
        raise ValueError("target must be in (0, 1)")

    def f(s):
        return transmission_accuracy(ChannelParams(sigma_prod, sigma_per, s)) - target

    # bracket around the combined-noise width before touching the range ends
    guess = 2.0 * float(ndtri(0.5 + target / 2.0)) * math.hypot(sigma_prod, sigma_per)
    a, b = max(lo, 0.25 * guess), min(hi, 2.0 * guess)
    while a > lo and f(a) >= 0:
        b, a = a, max(lo, 0.5 * a)
    if f(a) >= 0:
        return lo
    while f(b) < 0:
        if b >= hi:
            raise NoSolution(f"accuracy {target} not reached for spacing up to {hi}")
        a, b = b, min(hi, 2.0 * b)
    return float(brentq(f, a, b, xtol=1e-6))


def production_only_limit(sigma_prod: float, target: float = 0.99) -> float:
    """Spacing for ``target`` accuracy when perception is noiseless."""
    return 2.0 * sigma_prod * float(ndtri(0.5 + target / 2.0))


@dataclass(frozen=True)
class ProminenceQuery:
    n1: int
    n2: int
    a: float = 0.0

    def __post_init__(self):
        if not 1 <= self.n1 <= self.n2:
            raise ValueError("need 1 <= n1 <= n2")
        if not 0 <= self.a < 1:
            raise ValueError("attenuation a must be in [0, 1)")


def reduce_octave(j: int, i: int) -> Fraction:
    """j/i folded into (1, 2] by powers of two; unison stays 1/1."""
    r = Fraction(j, i)
    if r == 1:
        return r
    while r > 2:
        r /= 2
    while r <= 1:
        r *= 2
    return r


def prominence_counts(query: ProminenceQuery) -> List[Tuple[Fraction, float]]:
    """Weighted counts of reduced harmonic ratios, largest first.

    Pairs (i, j) with i <= n1 and i <= j <= n2 are counted once each with
    weight (1-a)**(i-1) * (1-a)**(j-1).  Ties are ordered by the product
    of numerator and denominator, then by size.
    """
    keep = 1.0 - query.a
    acc = {}
    for i in range(1, query.n1 + 1):
        for j in range(i, query.n2 + 1):
            r = reduce_octave(j, i)
            acc[r] = acc.get(r, 0.0) + keep ** (i - 1) * keep ** (j - 1)
    return sorted(acc.items(), key=lambda kv: (-kv[1], kv[0].numerator * kv[0].denominator, kv[0]))


def round_sig(x: float, digits: int = 1) -> float:
    if x == 0:
        return 0.0
    return round(x, digits - 1 - int(math.floor(math.log10(abs(x)))))


def harmonicity_distribution(hbar, width: float = 0.25) -> DistributionEstimate:
    """Histogram of H-bar values on bins of ``width`` aligned to multiples of it."""
    h = np.asarray(hbar, dtype=np.float64)
    lo = math.floor(h.min() / width) * width
    hi = (math.floor(h.max() / width) + 1) * width
    edges = np.arange(lo, hi + 0.5 * width, width)
    counts, _ = np.histogram(h, bins=edges)
    return DistributionEstimate("Histogram", 0.5 * (edges[1:] + edges[:-1]), counts / counts.sum(),
                                edges)


def support_bounds(h_dist: DistributionEstimate) -> Tuple[float, float]:
    """(H_min, H_max): outer edges of the occupied bins, or grid ends for a KDE."""
    nz = np.flatnonzero(h_dist.mass > 0)
    if h_dist.edges is not None:
        return float(h_dist.edges[nz[0]]), float(h_dist.edges[nz[-1] + 1])
    return float(h_dist.grid[nz[0]]), float(h_dist.grid[nz[-1]])


class AcceptanceResult(NamedTuple):
    acceptance: float
    selectivity: float
    accepted: DistributionEstimate


def _check(h_dist):
    if abs(float(np.sum(h_dist.mass)) - 1.0) > 1e-9:
        raise InvalidDensity("H distribution must be normalised")


def _cost_fn(form, A, m, cost):
    if cost is not None:
        return cost
    if A is None:
        raise ValueError("A is required for the family cost forms")
    return lambda h: _costs.cost_family(h, form, A, m)


def analytic_acceptance(h_dist: DistributionEstimate, form: str = "C1", A: Optional[float] = None,
                        m: float = 1.0, beta: float = 0.0,
                        cost: Optional[Callable] = None) -> AcceptanceResult:
    """Reweight an H-bar distribution by the Boltzmann acceptance.

    ``cost`` overrides the family form with any vectorized C(H-bar).
    Returns the accepted fraction, the JSD between the original and the
    accepted distributions, and the accepted distribution itself.
    """
    _check(h_dist)
    c = np.asarray(_cost_fn(form, A, m, cost)(h_dist.grid), dtype=np.float64)
    if beta == 0:
        return AcceptanceResult(1.0, 0.0, h_dist)
    with np.errstate(divide="ignore"):
        logp = np.where(c <= 0, 0.0, -beta * np.maximum(c, 0.0)) + np.log(h_dist.mass)
    top = logp.max()
    if not np.isfinite(top):
        raise AbortTooSelective("no mass is accepted", projected_rate=0.0)
    acceptance = float(np.exp(logsumexp(logp)))
    if acceptance == 0.0:
        raise AbortTooSelective("accepted mass underflows", projected_rate=0.0)
    w = np.exp(logp - top)
    accepted = DistributionEstimate(h_dist.kind, h_dist.grid, w / w.sum(), h_dist.edges)
    return AcceptanceResult(acceptance, jsd(h_dist, accepted), accepted)


def beta_for_selectivity(h_dist: DistributionEstimate, form: str = "C1", A: Optional[float] = None,
                         m: float = 1.0, target_jsd: float = 0.5,
                         cost: Optional[Callable] = None, tol: float = 1e-7) -> float:
    """Bias strength whose accepted distribution has JSD ``target_jsd``.

    Bisection on log(beta); raises :class:`NoSolution` when the selectivity
    saturates below the target.
    """
    if target_jsd <= 0:
        return 0.0
    if target_jsd >= 1:
        raise NoSolution("JSD cannot reach 1 by reweighting")

    def sel(beta):
        try:
            return analytic_acceptance(h_dist, form, A, m, beta, cost).selectivity
        except AbortTooSelective:
            return float("nan")

    lo, hi = 0.0, 1e-3
    s_hi = sel(hi)
    while s_hi < target_jsd:
        lo = hi
        hi *= 2.0
        s_new = sel(hi)
        if not np.isfinite(s_new) or hi > 1e12 or (s_new - s_hi < 1e-12 and hi > 1e3):
            raise NoSolution(f"selectivity saturates near {s_hi:.4f} below {target_jsd}")
        s_hi = s_new
    if not np.isfinite(s_hi):
        raise NoSolution("acceptance underflows before the target selectivity")
    for _ in range(200):
        mid = math.sqrt(lo * hi) if lo > 0 else hi / 2.0
        s = sel(mid)
        if not np.isfinite(s):
            hi = mid
            continue
        if abs(s - target_jsd) < tol:
            return mid
        if s < target_jsd:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * hi:
            break
    return math.sqrt(lo * hi) if lo > 0 else hi


class SweepPoint(NamedTuple):
    form: str
    A: float
    m: float
    beta: float
    acceptance: float
    selectivity: float


def sweep_A(h_dist: DistributionEstimate, form: str, A_values, m: float = 1.0,
            target_jsd: float = 0.5) -> List[SweepPoint]:
    """Acceptance at fixed selectivity for each A; unreachable points get NaN."""
    out = []
    for A in A_values:
        try:
            b = beta_for_selectivity(h_dist, form, float(A), m, target_jsd)
            r = analytic_acceptance(h_dist, form, float(A), m, b)
            out.append(SweepPoint(form, float(A), m, b, r.acceptance, r.selectivity))
        except (NoSolution, AbortTooSelective, CostDivisionByZero):
            out.append(SweepPoint(form, float(A), m, math.nan, math.nan, math.nan))
    return out


def admissible_A(h_dist: DistributionEstimate, form: str, A: float) -> bool:
    """True when the cost stays non-negative over the support of ``h_dist``."""
    lo, hi = support_bounds(h_dist)
    if form in ("C1", "C3"):
        return A >= hi
    if form in ("C2", "C4"):
        return A >= -lo
    raise ValueError(f"unknown cost form {form!r}")


def optimal_A(points: List[SweepPoint], h_dist: DistributionEstimate) -> SweepPoint:
    """Sweep point with the highest acceptance among those with C >= 0."""
    ok = [p for p in points if admissible_A(h_dist, p.form, p.A) and np.isfinite(p.acceptance)]
    if not ok:
        raise NoSolution("no admissible A reaches the target selectivity")
    return max(ok, key=lambda p: p.acceptance)


def sweep_m(h_dist: DistributionEstimate, form: str, A: float, m_values,
            target_jsd: float = 0.5) -> List[SweepPoint]:
    out = []
    for m in m_values:
        out.extend(sweep_A(h_dist, form, [A], float(m), target_jsd))
    return out

