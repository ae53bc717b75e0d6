"""Comparison of generated populations with a database of real scales."""

import csv
import enum
import functools
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from . import kernels
from .core import DEFAULT_TOLERANCE, OCTAVE, Population, ScaleRecord, notes_from_intervals
from .costs import HarmonicityTemplate
from .errors import DegenerateSample, InvalidDensity
from .generator import Model, ModelConfig, acceptance_probability, generate_population, model_costs
from .stats import INTERVAL_GRID, bootstrap_ci, cvm_two_sample, jsd, kde, pearson

PROHIBITED_MIN_INTERVAL = 70.0
OCTAVE_TOLERANCE = 10.0
OFFSET = 10  # note offsets -10..+10 cents in the prediction probability
THRESHOLD_QUANTILE = 0.10
TRITONE = (580.0, 620.0)


class Category(str, enum.Enum):
    FOUND = "Found"
    PROHIBITED = "Prohibited"
    UNLIKELY_CONSTRAINT = "UnlikelyConstraint"
    UNDERSAMPLED = "Undersampled"
    UNLIKELY_BIAS = "UnlikelyBias"


def _notes(rows) -> np.ndarray:
    return np.vstack([notes_from_intervals(r.adjacent_intervals if hasattr(r, "adjacent_intervals")
                                           else r) for r in rows])


def _by_n(records: Sequence[ScaleRecord]) -> Dict[int, List[ScaleRecord]]:
    out: Dict[int, List[ScaleRecord]] = {}
    for r in records:
        out.setdefault(r.N, []).append(r)
    return out


def found_flags(records: Sequence[ScaleRecord], population: Population,
                tol: float = DEFAULT_TOLERANCE) -> np.ndarray:
    """For each record, whether some generated scale of equal N is similar."""
    flags = np.zeros(len(records), dtype=bool)
    if len(population) == 0:
        return flags
    pop_notes = population.notes()
    idx = [i for i, r in enumerate(records) if r.N == population.N]
    if idx:
        flags[idx] = kernels.found_flags(_notes([records[i] for i in idx]), pop_notes, tol)
    return flags


class FoundFraction(NamedTuple):
    found: int
    total: int
    f_D: float


def fraction_found(populations, records: Sequence[ScaleRecord],
                   tol: float = DEFAULT_TOLERANCE) -> Dict[int, FoundFraction]:
    """f_D per N.  ``populations`` is one Population or a mapping N -> Population."""
    if isinstance(populations, Population):
        populations = {populations.N: populations}
    out = {}
    for n, group in sorted(_by_n(records).items()):
        pop = populations.get(n)
        if pop is None:
            continue
        k = int(found_flags(group, pop, tol).sum())
        out[n] = FoundFraction(k, len(group), k / len(group))
    return out


# --- prediction probabilities ----------------------------------------------

@functools.lru_cache(maxsize=16)
def interval_density_min(N: int, I_min: float = 80.0, draws: int = 1_000_000,
                         seed: int = 0) -> np.ndarray:
    """Per-interval MIN-model density on integer cents 0..1200.

    Entry k is the probability that an adjacent interval rounds to k cents,
    pooled over all interval positions of ``draws`` accepted scales.
    """
    rep = generate_population(ModelConfig(Model.MIN, N, I_min=I_min, S=draws, seed=seed))
    k = np.rint(rep.population.intervals).astype(np.int64).ravel()
    dens = np.bincount(k, minlength=int(OCTAVE) + 1)[: int(OCTAVE) + 1].astype(np.float64)
    dens /= dens.sum()
    dens.setflags(write=False)
    return dens


def _check_density(density):
    d = np.asarray(density, dtype=np.float64)
    if d.ndim != 1 or d.size != int(OCTAVE) + 1:
        raise InvalidDensity("density must have one entry per cent from 0 to 1200")
    if np.any(d < 0) or abs(d.sum() - 1.0) > 1e-6:
        raise InvalidDensity("density must be non-negative and sum to 1")
    return d


def _lookup(density, cents):
    k = np.rint(np.asarray(cents, dtype=np.float64)).astype(np.int64)
    ok = (k >= 0) & (k < density.size)
    return np.where(ok, density[np.clip(k, 0, density.size - 1)], 0.0)


def _interior(notes):
    # interior notes; the final note is pinned to the octave
    return np.asarray(notes, dtype=np.float64)[1:-1]


def p_min_exact(notes, density) -> float:
    """Sum over all offset vectors in {-10..10}^(N-1) of the product of
    interval densities, by a transfer-matrix pass over the interior notes."""
    d = _check_density(density)
    inner = _interior(notes)
    off = np.arange(-OFFSET, OFFSET + 1, dtype=np.float64)
    if inner.size == 0:
        return float(_lookup(d, OCTAVE))
    v = _lookup(d, inner[0] + off)
    for k in range(1, inner.size):
        step = (inner[k] + off)[None, :] - (inner[k - 1] + off)[:, None]
        v = v @ _lookup(d, step)
    return float(v @ _lookup(d, OCTAVE - (inner[-1] + off)))


def p_min_brute(notes, density) -> float:
    """Direct summation over every offset vector (slow; for checking)."""
    d = _check_density(density)
    inner = _interior(notes)
    total = 0.0
    for offs in itertools.product(range(-OFFSET, OFFSET + 1), repeat=inner.size):
        shifted = np.concatenate([[0.0], inner + np.array(offs, dtype=np.float64), [OCTAVE]])
        total += float(np.prod(_lookup(d, np.diff(shifted))))
    return total


class MCEstimate(NamedTuple):
    value: float
    stderr: float


def p_min_montecarlo(notes, density, draws: int = 1_000_000, seed: int = 0,
                     chunk: int = 200_000) -> MCEstimate:
    """Stratified estimate: equal draws for each offset of the first
    interior note, uniform offsets elsewhere."""
    d = _check_density(density)
    inner = _interior(notes)
    if inner.size == 0:
        return MCEstimate(p_min_exact(notes, d), 0.0)
    n_off = 2 * OFFSET + 1
    per = max(2, draws // n_off)
    rng = np.random.default_rng(seed)
    scale = float(n_off) ** (inner.size - 1)
    total = var = 0.0
    for s in range(n_off):
        vals = []
        left = per
        while left:
            m = min(chunk, left)
            offs = rng.integers(-OFFSET, OFFSET + 1, size=(m, inner.size)).astype(np.float64)
            offs[:, 0] = s - OFFSET
            notes_m = np.concatenate([np.zeros((m, 1)), inner + offs, np.full((m, 1), OCTAVE)], axis=1)
            vals.append(np.prod(_lookup(d, np.diff(notes_m, axis=1)), axis=1))
            left -= m
        v = np.concatenate(vals) * scale
        total += v.mean()
        var += v.var(ddof=1) / v.size
    return MCEstimate(float(total), float(math.sqrt(var)))


def p_min(notes, density, method: str = "exact", **kw):
    """Probability that MIN generates a scale similar to ``notes``.

    ``method`` is ``"exact"`` (transfer matrix, any N), ``"brute"``, or
    ``"montecarlo"`` (returns an :class:`MCEstimate`).
    """
    if method == "exact":
        return p_min_exact(notes, density)
    if method == "brute":
        return p_min_brute(notes, density)
    if method == "montecarlo":
        return p_min_montecarlo(notes, density, **kw)
    raise ValueError("method must be exact, brute or montecarlo")


def p_any(intervals, pmin: float, configs: Iterable[ModelConfig]) -> float:
    """P_MIN times the summed acceptance of the biased models, capped at 1."""
    iv = np.asarray(intervals, dtype=np.float64)[None, :]
    total = 0.0
    for cfg in configs:
        if cfg.model not in (Model.HAR, Model.FIF, Model.TRANS):
            raise ValueError("p_any takes HAR, FIF and TRANS configs")
        c = model_costs(cfg, iv)["cost"]
        total += float(np.asarray(acceptance_probability(c, cfg.beta)).ravel()[0])
    return min(1.0, pmin * total)


# --- not-found taxonomy ------------------------------------------------------

def is_prohibited(record: ScaleRecord) -> bool:
    return (min(record.adjacent_intervals) < PROHIBITED_MIN_INTERVAL
            or abs(record.octave - OCTAVE) > OCTAVE_TOLERANCE)


@dataclass
class FoundReport:
    ids: List[str]
    found_by: List[frozenset]
    category: List[Category]
    p_min: np.ndarray
    p_any: np.ndarray
    thresholds: Dict[str, float] = field(default_factory=dict)

    def counts(self) -> Dict[str, int]:
        c = Counter(cat.value for cat in self.category)
        return {cat.value: c.get(cat.value, 0) for cat in Category}

    def to_csv(self, path, models: Sequence[str] = ()) -> None:
        models = list(models) or sorted({m for s in self.found_by for m in s})
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["scale_id"] + [f"found_{m}" for m in models]
                        + ["p_min", "p_any", "category"])
            for i, sid in enumerate(self.ids):
                wr.writerow([sid] + [int(m in self.found_by[i]) for m in models]
                            + [f"{self.p_min[i]:.6g}", f"{self.p_any[i]:.6g}",
                               self.category[i].value])


def classify_not_found(records: Sequence[ScaleRecord], found_by: Sequence[Iterable[str]],
                       pmin, pany, quantile: float = THRESHOLD_QUANTILE) -> FoundReport:
    """Assign every record to one category.

    Found scales are those matched by any model.  The rest are
    (i) prohibited if an interval is under 70 cents or the octave is off by
    more than 10; (ii) unlikely under the constraint if P_MIN is below the
    level that only 10% of found scales fall under; (iii) undersampled if
    P_ANY is above the matching 10% level; (iv) unlikely under the biases
    otherwise.
    """
    pmin = np.asarray(pmin, dtype=np.float64)
    pany = np.asarray(pany, dtype=np.float64)
    fb = [frozenset(s) for s in found_by]
    if not (len(records) == len(fb) == pmin.size == pany.size):
        raise ValueError("inputs must have one entry per record")
    found = np.array([bool(s) for s in fb])
    thr = {}
    if found.any():
        thr["p_min"] = float(np.quantile(pmin[found], quantile))
        thr["p_any"] = float(np.quantile(pany[found], quantile))
    else:
        thr["p_min"] = thr["p_any"] = 0.0
    cats = []
    for i, rec in enumerate(records):
        if found[i]:
            cats.append(Category.FOUND)
        elif is_prohibited(rec):
            cats.append(Category.PROHIBITED)
        elif pmin[i] < thr["p_min"]:
            cats.append(Category.UNLIKELY_CONSTRAINT)
        elif pany[i] > thr["p_any"]:
            cats.append(Category.UNDERSAMPLED)
        else:
            cats.append(Category.UNLIKELY_BIAS)
    return FoundReport([r.id for r in records], fb, cats, pmin, pany, thr)


# --- interval statistics -----------------------------------------------------

def interval_matrix(scales) -> np.ndarray:
    if isinstance(scales, Population):
        return scales.intervals
    if isinstance(scales, np.ndarray):
        return np.atleast_2d(scales)
    return np.vstack([np.asarray(s.adjacent_intervals if hasattr(s, "adjacent_intervals") else s,
                                 dtype=np.float64) for s in scales])


def tritone_fraction(groups: Mapping[int, object], window=TRITONE) -> Dict[int, float]:
    """Fraction of circular intervals within [580, 620] cents, per N."""
    out = {}
    for n, scales in sorted(groups.items()):
        iv = interval_matrix(scales)
        if iv.size == 0:
            raise DegenerateSample(f"no scales for N={n}")
        ci = kernels.circular_intervals(iv)
        out[n] = float(np.mean((ci >= window[0]) & (ci <= window[1])))
    return out


def size_categories(intervals, x: float = 0.2) -> List[str]:
    """S, M or L for each interval relative to the equidistant step 1200/N."""
    iv = np.asarray(intervals, dtype=np.float64)
    step = OCTAVE / iv.size
    return ["S" if v < (1 - x) * step else "L" if v > (1 + x) * step else "M" for v in iv]


ADJACENCY_CLASSES = ("M-M", "M-X", "X-E", "X-O")


def _pair_class(a: str, b: str) -> str:
    if a == "M" and b == "M":
        return "M-M"
    if a == "M" or b == "M":
        return "M-X"
    return "X-E" if a == b else "X-O"


class AdjacencyProfile(NamedTuple):
    observed: Dict[str, float]
    baseline: Dict[str, float]
    fractions: Dict[str, float]
    pairs: int


def adjacency_profile(scales, x: float = 0.2) -> AdjacencyProfile:
    """Unordered frequencies of neighbouring size classes (circularly) and
    what independent random pairing would give from the same marginals."""
    iv = interval_matrix(scales)
    counts = Counter()
    sizes = Counter()
    for row in iv:
        cats = size_categories(row, x)
        sizes.update(cats)
        for i in range(len(cats)):
            counts[_pair_class(cats[i], cats[(i + 1) % len(cats)])] += 1
    pairs = sum(counts.values())
    if pairs == 0:
        raise DegenerateSample("no adjacent pairs")
    tot = sum(sizes.values())
    fs, fm, fl = (sizes[c] / tot for c in "SML")
    baseline = {"M-M": fm * fm, "M-X": 2 * fm * (fs + fl), "X-E": fs * fs + fl * fl,
                "X-O": 2 * fs * fl}
    observed = {c: counts[c] / pairs for c in ADJACENCY_CLASSES}
    return AdjacencyProfile(observed, baseline, {"S": fs, "M": fm, "L": fl}, pairs)


# --- mixing ------------------------------------------------------------------

def _canonical_rotation(seq):
    n = len(seq)
    return min(tuple(seq[i:] + seq[:i]) for i in range(n))


def unique_orderings(intervals) -> List[tuple]:
    """Distinct circular orderings of the interval multiset (rotations merged)."""
    iv = tuple(float(v) for v in intervals)
    first, rest = iv[0], iv[1:]
    seen = set()
    out = []
    for perm in sorted(set(itertools.permutations(rest))):
        key = _canonical_rotation((first,) + perm)
        if key not in seen:
            seen.add(key)
            out.append((first,) + perm)
    return out


def mix_cost(intervals) -> float:
    """Root-mean-square deviation of neighbouring-pair sums from 2400/N."""
    iv = np.asarray(intervals, dtype=np.float64)
    pair = iv + np.roll(iv, -1)
    return float(np.sqrt(np.mean((pair - 2.0 * OCTAVE / iv.size) ** 2)))


def mix_probabilities(orderings) -> np.ndarray:
    """P_j proportional to exp(1 / C~_j), C~ = C / max C.

    Orderings with zero cost share all the probability; if every cost is
    zero the orderings are equally likely.
    """
    c = np.array([mix_cost(o) for o in orderings])
    top = c.max()
    if top == 0:
        return np.full(c.size, 1.0 / c.size)
    zero = c == 0
    if zero.any():
        return zero / zero.sum()
    logits = top / c
    w = np.exp(logits - logits.max())
    return w / w.sum()


def mix_rearrange(intervals, rng: np.random.Generator) -> tuple:
    """Reorder a scale's intervals, favouring well-mixed orderings."""
    iv = tuple(float(v) for v in intervals)
    if len(iv) < 3:
        raise ValueError("mixing needs N >= 3")
    orders = unique_orderings(iv)
    if len(orders) == 1:
        return iv
    if max(mix_cost(o) for o in orders) == 0:
        return iv
    p = mix_probabilities(orders)
    return orders[int(rng.choice(len(orders), p=p))]


def mix_population(population: Population, seed: int = 0) -> Population:
    rng = np.random.default_rng(seed)
    rows = [mix_rearrange(r, rng) for r in population.intervals]
    return Population(np.array(rows), population.costs)


# --- clustering --------------------------------------------------------------

def _padded(records):
    n_max = max(r.N for r in records)
    pad = np.zeros((len(records), n_max))
    lengths = np.array([r.N for r in records], dtype=np.int64)
    for i, r in enumerate(records):
        pad[i, : r.N] = r.adjacent_intervals
    return pad, lengths


def scale_distance_matrix(records: Sequence[ScaleRecord]) -> np.ndarray:
    """d_C = sqrt(d_AB * d_BA) with d_AB = sum_i min_j |I^A_i - I^B_j|."""
    pad, lengths = _padded(records)
    d = kernels.pairwise_min_distance(pad, lengths)
    out = np.sqrt(d * d.T)
    np.fill_diagonal(out, 0.0)
    return out


@dataclass
class ClusterAssignment:
    labels: Dict[str, int]
    linkage: np.ndarray
    ids: List[str]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["scale_id", "cluster"])
            for sid in self.ids:
                wr.writerow([sid, self.labels[sid]])


def cluster_scales(records: Sequence[ScaleRecord], k: int = 16) -> ClusterAssignment:
    """Ward clustering on d_C cut into ``k`` clusters.

    Records are ordered by id first, so the result does not depend on input
    order.  Labels 1..k are numbered by first appearance in id order.
    """
    if k < 1 or len(records) < k:
        raise ValueError(f"need at least k={k} scales, got {len(records)}")
    recs = sorted(records, key=lambda r: r.id)
    ids = [r.id for r in recs]
    if len(set(ids)) != len(ids):
        raise ValueError("scale ids must be unique")
    if len(recs) == 1:
        return ClusterAssignment({ids[0]: 1}, np.empty((0, 4)), ids)
    z = linkage(squareform(scale_distance_matrix(recs), checks=False), method="ward")
    raw = fcluster(z, t=k, criterion="maxclust")
    relabel = {}
    for lab in raw:
        relabel.setdefault(int(lab), len(relabel) + 1)
    return ClusterAssignment({sid: relabel[int(l)] for sid, l in zip(ids, raw)}, z, ids)


# --- harmonicity of real intervals -------------------------------------------

class Prevalence(NamedTuple):
    windows: List[tuple]
    frequency: np.ndarray
    score: np.ndarray
    r: float


def prevalence_vs_harmonicity(records: Sequence[ScaleRecord], template: HarmonicityTemplate,
                              N: int) -> Prevalence:
    """Share of circular intervals landing in each template window, against
    the window's score, over windows hit at least once."""
    group = [r for r in records if r.N == N]
    if not group:
        raise DegenerateSample(f"no scales with N={N}")
    ci = kernels.circular_intervals(interval_matrix(group)).ravel()
    idx = template.window_index(ci)
    idx = idx[idx >= 0]
    counts = np.bincount(idx, minlength=len(template.windows))
    hit = np.flatnonzero(counts)
    if hit.size < 3:
        raise DegenerateSample("fewer than three windows are hit")
    freq = counts[hit] / ci.size
    score = np.array([template.windows[i].score for i in hit])
    wins = [(template.windows[i].x, template.windows[i].y) for i in hit]
    return Prevalence(wins, freq, score, pearson(freq, score))


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(list(header))
        for row in rows:
            wr.writerow(list(row))


# --- model vs database comparison ----------------------------------------------

def interval_distribution(intervals):
    """KDE of adjacent intervals on the 1-cent grid 0..1200."""
    return kde(np.asarray(intervals, dtype=np.float64).ravel(), INTERVAL_GRID)


def compare_population(pop: Population, records: Sequence[ScaleRecord], resamples: int = 1000,
                       seed: int = 0, tol: float = DEFAULT_TOLERANCE) -> dict:
    """JSD and CvM of adjacent intervals plus f_D for one N, each with a
    bootstrap interval over resampled database scales."""
    group = [r for r in records if r.N == pop.N]
    if not group:
        raise DegenerateSample(f"no database scales with N={pop.N}")
    db_iv = interval_matrix(group)
    model_kde = interval_distribution(pop.intervals)
    model_iv = pop.intervals.ravel()
    flags = found_flags(group, pop, tol).astype(np.float64)
    idx = np.arange(len(group))

    def jsd_of(ix):
        return jsd(model_kde, interval_distribution(db_iv[ix]))

    def cvm_of(ix):
        return cvm_two_sample(model_iv, db_iv[ix].ravel())

    out = {"N": pop.N, "S": len(group)}
    for name, fn, full in (("jsd", jsd_of, jsd_of(idx)), ("cvm", cvm_of, cvm_of(idx)),
                           ("f_D", lambda ix: flags[ix].mean(), flags.mean())):
        ci = bootstrap_ci(idx, fn, n_resamples=resamples, seed=seed)
        out[name] = float(full)
        out[f"{name}_lo"] = ci.lo
        out[f"{name}_hi"] = ci.hi
    return out
