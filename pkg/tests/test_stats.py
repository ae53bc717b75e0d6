import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps
from scipy.spatial.distance import jensenshannon

from scalesim.errors import DegenerateSample, GridMismatch
from scalesim.stats import (INTERVAL_GRID, DistributionEstimate, bootstrap_ci, cvm_rank_form,
                            cvm_two_sample, histogram, jsd, jsd_mass, kde, note_edges, pearson,
                            silverman_bandwidth, spearman, weighted_mean)

mass_st = st.lists(st.floats(0, 1), min_size=2, max_size=30).filter(lambda v: sum(v) > 1e-6)


def dist(mass):
    m = np.asarray(mass, dtype=float)
    return DistributionEstimate("Histogram", np.arange(m.size, dtype=float), m / m.sum())


# --- DistributionEstimate ----------------------------------------------------------

def test_distribution_validation():
    with pytest.raises(ValueError):
        DistributionEstimate("Histogram", [0, 1], [0.5, 0.6])
    with pytest.raises(ValueError):
        DistributionEstimate("KDE", [1, 0], [0.5, 0.5])
    with pytest.raises(ValueError):
        DistributionEstimate("Spline", [0, 1], [0.5, 0.5])


def test_distribution_csv(tmp_path):
    d = dist([1, 3])
    d.to_csv(tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines() == ["grid_cents,mass", "0.000000,0.25",
                                                              "1.000000,0.75"]


# --- KDE and histograms -------------------------------------------------------------

def test_kde_examples(rng):
    peak = kde(600 + rng.normal(0, 1e-3, 500))
    assert peak.grid[np.argmax(peak.mass)] == 600
    two = kde(np.concatenate([rng.normal(300, 10, 2000), rng.normal(900, 10, 2000)]))
    m = two.mass
    maxima = np.flatnonzero((m[1:-1] > m[:-2]) & (m[1:-1] > m[2:])) + 1
    assert len(maxima) == 2
    assert abs(m.sum() - 1) < 1e-12


def test_silverman_bandwidth():
    x = np.random.default_rng(0).normal(0, 1, 10_000)
    x = (x - x.mean()) / x.std(ddof=1) * 100
    assert silverman_bandwidth(x) == pytest.approx(1.06 * 100 * 1e4 ** -0.2)
    assert silverman_bandwidth(x) == pytest.approx(16.8, abs=0.05)
    with pytest.raises(DegenerateSample):
        kde([5.0, 5.0, 5.0])
    with pytest.raises(DegenerateSample):
        kde([1.0])


def test_kde_shuffle_invariant(rng):
    x = rng.uniform(0, 1200, 3000)
    a = kde(x).mass
    b = kde(rng.permutation(x)).mass
    np.testing.assert_array_equal(a, b)


def test_kde_matches_scipy(rng):
    x = rng.normal(600, 80, 2000)
    got = kde(x).mass
    ref = sps.gaussian_kde(x, bw_method=silverman_bandwidth(x) / x.std(ddof=1))(INTERVAL_GRID)
    np.testing.assert_allclose(got, ref / ref.sum(), rtol=1e-8, atol=1e-14)


def test_histogram_and_note_edges():
    e = note_edges()
    assert e[0] == 15 and e[-1] == 1185 and np.allclose(np.diff(e), 30)
    h = histogram([20, 20, 50, 2000], e)
    assert h.mass[0] == pytest.approx(2 / 3) and h.edges is not None
    with pytest.raises(DegenerateSample):
        histogram([5000], e)


# --- JSD --------------------------------------------------------------------------------

def test_jsd_examples():
    p = dist([0.5, 0.5])
    assert jsd(p, p) == 0.0
    assert jsd(dist([1, 0]), dist([0, 1])) == pytest.approx(1.0)
    assert jsd(p, dist([1, 0])) == pytest.approx(0.3112781245)
    with pytest.raises(GridMismatch):
        jsd(p, dist([1, 1, 1]))
    with pytest.raises(GridMismatch):
        jsd(p, DistributionEstimate("Histogram", [0.0, 2.0], [0.5, 0.5]))


@given(mass_st, st.randoms(use_true_random=False))
def test_jsd_axioms(p, r):
    q = list(p)
    r.shuffle(q)
    if sum(q) == 0:
        return
    a, b = dist(p), dist(q)
    assert jsd(a, b) == jsd(b, a)
    assert 0.0 <= jsd(a, b) <= 1.0
    assert jsd(a, a) == 0.0


@given(mass_st)
def test_jsd_matches_scipy(p):
    # scipy returns the square root of the divergence
    q = np.linspace(1, 2, len(p))
    a = np.asarray(p) / np.sum(p)
    b = q / q.sum()
    assert jsd_mass(a, b) == pytest.approx(jensenshannon(a, b, base=2) ** 2, abs=1e-10)


# --- CvM --------------------------------------------------------------------------------

def test_cvm_examples():
    assert cvm_two_sample([1, 2], [1, 2]) == cvm_two_sample([2, 1], [2, 1])
    x = np.arange(10.0)
    # identical samples: EDFs coincide, so the statistic is 0 (its minimum)
    assert cvm_two_sample(x, x) == 0.0


def test_cvm_matches_scipy_and_rank_form(rng):
    for n, m in [(5, 7), (40, 25), (300, 500)]:
        x, y = rng.normal(size=n), rng.normal(0.3, 1.2, size=m)
        ref = sps.cramervonmises_2samp(x, y).statistic
        assert cvm_rank_form(x, y) == pytest.approx(ref, rel=1e-10)
        assert cvm_two_sample(x, y) == pytest.approx(ref, rel=1e-10)


@settings(max_examples=40)
# values on a 0.01 lattice, so the transforms stay strictly monotone in floating point
@given(st.lists(st.integers(-10_000, 10_000), min_size=2, max_size=40, unique=True),
       st.lists(st.integers(-10_000, 10_000), min_size=2, max_size=40, unique=True))
def test_cvm_monotone_transform_invariant(x, y):
    x, y = np.array(x) / 100.0, np.array(y) / 100.0
    base = cvm_two_sample(x, y)
    assert cvm_two_sample(np.arctan(x / 7), np.arctan(y / 7)) == pytest.approx(base, abs=1e-12)
    assert cvm_two_sample(x ** 3 + x, y ** 3 + y) == pytest.approx(base, abs=1e-12)


# --- bootstrap -------------------------------------------------------------------------------

def test_bootstrap_examples(rng):
    c = bootstrap_ci(np.full(50, 3.0), n_resamples=200)
    assert c.lo == c.hi == c.mean == 3.0
    x = rng.normal(size=10_000)
    ci = bootstrap_ci(x, n_resamples=400, seed=1)
    assert ci.hi - ci.lo == pytest.approx(2 * 1.96 / 100, rel=0.15)
    assert bootstrap_ci(x, n_resamples=100, seed=1) == bootstrap_ci(x, n_resamples=100, seed=1)
    with pytest.raises(DegenerateSample):
        bootstrap_ci(np.array([]))


def test_bootstrap_converges(rng):
    x = rng.exponential(size=500)
    a = bootstrap_ci(x, n_resamples=500, seed=3)
    b = bootstrap_ci(x, n_resamples=1000, seed=3)
    se = x.std() / np.sqrt(x.size)
    assert abs(a.lo - b.lo) < 0.5 * se and abs(a.hi - b.hi) < 0.5 * se


# --- correlation ------------------------------------------------------------------------------

def test_correlation_examples():
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    assert pearson(x, 2 * x + 1) == pytest.approx(1.0, abs=1e-15)
    assert pearson(x, -x) == pytest.approx(-1.0, abs=1e-15)
    y = np.array([2.0, 1.0, 4.0, 3.0, 7.0])
    # hand computation: sxy = 12, sxx = 10, syy = 21.2
    assert pearson(x, y) == pytest.approx(12 / np.sqrt(10 * 21.2))
    assert spearman(x, y) == pytest.approx(0.8)
    assert spearman([1, 2, 2, 3], [1, 2, 2, 3]) == pytest.approx(1.0)
    with pytest.raises(DegenerateSample):
        pearson(x, np.ones(5))
    with pytest.raises(DegenerateSample):
        pearson([1, 2], [1, 2])


def test_weighted_mean():
    assert weighted_mean([1.0, 3.0], [180, 540]) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        weighted_mean([1.0], [0.0])


def test_jsd_subnormal_mass():
    p = np.array([5e-324, 1.0 - 5e-324, 0.0])
    q = np.array([0.0, 0.5, 0.5])
    assert np.isfinite(jsd_mass(p, q)) and jsd_mass(p, q) == pytest.approx(jsd_mass([0, 1, 0], q))
