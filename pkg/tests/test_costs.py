import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scalesim import kernels
from scalesim.core import circular_intervals
from scalesim.costs import (HAR_NORMALIZATION, build_template, cost_family, cost_fif,
                            cost_fif_alt, cost_har, cost_trans, fifths_fraction, harmonic_score,
                            ratio_cents, scale_harmonicity)
from scalesim.errors import CostDivisionByZero, InvalidRatio
from scalesim.generator import ModelConfig, generate_population, sample_raw_scale
from scalesim.stats import spearman

from conftest import ET_MAJOR, JI_MAJOR


# --- independent oracles -------------------------------------------------------

def oracle_ratios(max_y=64):
    out = set()
    for y in range(1, max_y + 1):
        for x in range(y, 2 * y + 1):
            out.add(Fraction(x, y))
    return sorted(out, key=lambda r: (-(r.numerator + r.denominator - 1)
                                      / (r.numerator * r.denominator),
                                      r.numerator * r.denominator, r))


def oracle_score(v, w, ratios):
    """Score of the highest-ranked ratio whose centre lies within w/2 of v."""
    for r in ratios:
        if abs(v - 1200 * math.log2(r)) <= w / 2:
            return (r.numerator + r.denominator - 1) / (r.numerator * r.denominator) * 100
    return 0.0


def oracle_trans(iv, n, step=0.01):
    iv = np.asarray(iv, dtype=float)
    lo = iv.min()
    g = np.arange(lo / 2, 1.5 * lo + step / 2, step)
    r = iv[None, :] / g[:, None]
    dev = np.abs(np.ceil(r - 1e-9) - r) ** n
    obj = dev.mean(axis=1)
    k = int(np.argmin(obj))
    return obj[k], g[k]


RATIOS = oracle_ratios()


# --- harmonic score and template ---------------------------------------------------

def test_harmonic_score_examples():
    assert harmonic_score(1, 1) == 100.0
    assert harmonic_score(2, 1) == 100.0
    assert harmonic_score(3, 2) == pytest.approx(66.6666666667)
    for bad in [(4, 2), (1, 2), (3, 0)]:
        with pytest.raises(InvalidRatio):
            harmonic_score(*bad)


@pytest.mark.parametrize("w", [2.0, 10.0, 20.0, 40.0])
def test_template_structure(w):
    tpl = build_template(w)
    wins = tpl.windows
    centers = [win.center for win in wins]
    assert centers == sorted(centers)
    for a, b in zip(wins, wins[1:]):
        assert a.hi <= b.lo
    for win in wins:
        assert win.width <= w + 1e-9
        assert win.lo <= win.center or win.hi >= win.center
        assert win.score == pytest.approx(harmonic_score(win.x, win.y))
        assert win.center == pytest.approx(ratio_cents(win.x, win.y))
    assert tpl.window_for(702.0).x == 3 and tpl.window_for(702.0).y == 2


def test_fifth_window_at_w40():
    win = build_template(40.0).window_for(702.0)
    # neighbours 13/9 (637) and 8/5 (814) are far enough that 3/2 keeps its full width
    assert (win.x, win.y) == (3, 2)
    assert win.lo == pytest.approx(682.0, abs=0.05) and win.hi == pytest.approx(722.0, abs=0.05)


@pytest.mark.parametrize("w", [5.0, 20.0, 40.0])
def test_template_matches_oracle(w):
    tpl = build_template(w)
    v = np.random.default_rng(int(w)).uniform(0, 1200, 3000)
    got = tpl.score(v)
    want = np.array([oracle_score(x, w, RATIOS) for x in v])
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


def test_template_690_at_w20():
    tpl = build_template(20.0)
    assert tpl.score(690.0) == pytest.approx(oracle_score(690.0, 20.0, RATIOS))
    assert tpl.window_for(690.0) is None or (tpl.window_for(690.0).x, tpl.window_for(690.0).y) != (3, 2)


def test_window_index_consistent():
    tpl = build_template(20.0)
    v = np.random.default_rng(0).uniform(-20, 1250, 2000)
    idx = tpl.window_index(v)
    scores = np.array([tpl.windows[i].score if i >= 0 else 0.0 for i in idx])
    np.testing.assert_array_equal(scores, tpl.score(v))


def test_template_csv(tmp_path):
    tpl = build_template(20.0)
    tpl.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "ratio_x,ratio_y,center_cents,score,lo_cents,hi_cents"
    assert len(lines) == len(tpl.windows) + 1


def test_template_rejects_bad_w():
    with pytest.raises(ValueError):
        build_template(0.0)
    with pytest.raises(ValueError):
        build_template(150.0)


@pytest.mark.parametrize("w", [10.0, 20.0, 40.0])
def test_backends_agree_on_template(w):
    if kernels.numba_backend is None:
        pytest.skip("numba unavailable")
    pack = build_template(w).pack
    v = np.concatenate([np.random.default_rng(1).uniform(-30, 2500, 10**5), pack[3], pack[4],
                        np.nextafter(pack[3], -np.inf), np.nextafter(pack[4], np.inf)])
    np.testing.assert_array_equal(kernels.numba_backend.template_scores(v, pack),
                                  kernels.numpy_backend.template_scores(v, pack))


# --- harmonicity ------------------------------------------------------------------

def test_harmonicity_examples():
    tpl = build_template(20.0)
    assert scale_harmonicity([702, 498], tpl) == pytest.approx((200 / 3 + 50.0) / 2)
    ci = circular_intervals(ET_MAJOR)
    want = np.mean([oracle_score(v, 20.0, RATIOS) for v in ci])
    assert scale_harmonicity(ET_MAJOR, tpl) == pytest.approx(want, abs=1e-12)
    # regression pin, from the oracle above
    assert scale_harmonicity(ET_MAJOR, tpl) == pytest.approx(27.046210296984285, abs=1e-9)


def test_harmonicity_zero_when_no_hits():
    # 301.5 and 898.5 miss every half-width-0.25 window
    iv = [301.5, 898.5]
    assert all(oracle_score(v, 0.5, RATIOS) == 0 for v in iv)
    assert scale_harmonicity(iv, build_template(0.5)) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1.0, 2.0, 3.0]))
def test_harmonicity_is_mean_of_scores(seed, m):
    tpl = build_template(20.0)
    iv = sample_raw_scale(7, np.random.default_rng(seed), low=80.0)
    s = tpl.score(circular_intervals(iv))
    assert scale_harmonicity(iv, tpl, m) == pytest.approx(np.mean(s ** m / 100 ** (m - 1)))
    assert 0 <= scale_harmonicity(iv, tpl, m) <= 100


def test_harmonicity_backends_agree():
    if kernels.numba_backend is None:
        pytest.skip("numba unavailable")
    pack = build_template(20.0).pack
    iv = sample_raw_scale(6, np.random.default_rng(2), low=80.0, size=2000)
    for m in (1.0, 2.5):
        np.testing.assert_allclose(kernels.numba_backend.mean_harmonicity(iv, pack, m),
                                   kernels.numpy_backend.mean_harmonicity(iv, pack, m),
                                   rtol=1e-12)


def test_cost_har():
    assert cost_har(37.57, 17.0, 37.57) == 0
    assert cost_har(17.0, 17.0, 37.57) == 1
    assert cost_har(40.0, 17.0, 37.57) < 0
    assert HAR_NORMALIZATION[7] == (17.0, 37.57)
    with pytest.raises(ValueError):
        cost_har(20, 30, 30)


def test_spearman_increases_with_m():
    pop = generate_population(ModelConfig("MIN", 7, I_min=80, S=3000, seed=3)).population
    tpl = build_template(20.0)
    f = fifths_fraction(pop.intervals, 20.0)
    rho = [spearman(scale_harmonicity(pop.intervals, tpl, m), f) for m in (1, 2, 3, 10)]
    assert all(a < b for a, b in zip(rho, rho[1:])), rho


# --- fifths -----------------------------------------------------------------------

def test_fifths_examples():
    assert fifths_fraction(ET_MAJOR, 20.0) == pytest.approx(6 / 42)
    assert fifths_fraction(ET_MAJOR, 2.0) == 0.0
    assert fifths_fraction([240] * 5, 20.0) == 0.0
    assert cost_fif(0.0) == 1.0 and cost_fif(1.0) == 0.5
    assert cost_fif_alt(1 / 7, 7) == pytest.approx(0.0)


@given(st.integers(0, 10**6), st.integers(0, 6))
def test_fifths_rotation_invariant(seed, k):
    iv = list(sample_raw_scale(7, np.random.default_rng(seed)))
    assert fifths_fraction(iv, 20.0) == fifths_fraction(iv[k:] + iv[:k], 20.0)


def test_fifths_backends_agree():
    if kernels.numba_backend is None:
        pytest.skip("numba unavailable")
    iv = sample_raw_scale(7, np.random.default_rng(4), size=5000)
    np.testing.assert_array_equal(kernels.numba_backend.fifths_fraction(iv, 20.0),
                                  kernels.numpy_backend.fifths_fraction(iv, 20.0))


# --- compressibility ----------------------------------------------------------------

def test_trans_examples():
    c, g = cost_trans(ET_MAJOR, 2)
    assert c == 0.0 and g == pytest.approx(100.0)
    for n in (4, 5, 7, 9):
        c, g = cost_trans([1200 / n] * n, 2)
        assert c == pytest.approx(0.0, abs=1e-12)
        assert g == pytest.approx(1200 / n)
    assert cost_trans(JI_MAJOR, 2).cost > 0


def test_trans_ji_matches_grid_oracle():
    c, g = cost_trans(JI_MAJOR, 2)
    oc, og = oracle_trans(JI_MAJOR, 2, step=0.001)
    assert c <= oc + 1e-12
    assert oc - c < 1e-3


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 2, 3]))
def test_trans_never_above_grid(seed, n):
    iv = sample_raw_scale(7, np.random.default_rng(seed), low=60.0)
    c, g = cost_trans(iv, n)
    oc, _ = oracle_trans(iv, n)
    assert c <= oc + 1e-12
    # the reported gamma really attains the reported cost
    r = iv / g
    assert np.mean(np.abs(np.ceil(r - 1e-9) - r) ** n) == pytest.approx(c, abs=1e-12)
    assert iv.min() / 2 - 1e-9 <= g <= 1.5 * iv.min() + 1e-9


@given(st.integers(0, 10**6))
def test_trans_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    iv = sample_raw_scale(6, rng, low=60.0)
    assert cost_trans(iv, 2) == cost_trans(rng.permutation(iv), 2)


def test_trans_backends_agree():
    if kernels.numba_backend is None:
        pytest.skip("numba unavailable")
    iv = sample_raw_scale(7, np.random.default_rng(5), low=80.0, size=300)
    for nearest in (False, True):
        a = kernels.numba_backend.trans_cost(iv, 2.0, nearest)
        b = kernels.numpy_backend.trans_cost(iv, 2.0, nearest)
        np.testing.assert_allclose(a[0], b[0], atol=1e-12)


def test_trans_nearest_rounding():
    c, _ = cost_trans(JI_MAJOR, 2, rounding="nearest")
    assert 0 <= c <= 0.25
    with pytest.raises(ValueError):
        cost_trans(JI_MAJOR, 2, rounding="floor")
    with pytest.raises(ValueError):
        cost_trans(JI_MAJOR, 0)


# --- cost family ------------------------------------------------------------------

@given(st.floats(0, 100), st.floats(1, 100))
def test_family_identities(h, A):
    assert cost_family(h, "C3", A, 1.0) == pytest.approx(cost_family(h, "C1", A))
    assert cost_family(h, "C4", A, 1.0) == pytest.approx(cost_family(h, "C2", A))


def test_family_examples():
    assert cost_family(30.0, "C1", 30.0) == 0.0
    assert cost_family(18.0, "C2", -17.0) == pytest.approx(1.0)
    with pytest.raises(CostDivisionByZero):
        cost_family(17.0, "C2", -17.0)
    with pytest.raises(CostDivisionByZero):
        cost_family(np.array([16.0, 17.0]), "C4", -17.0, 2.0)
    with pytest.raises(ValueError):
        cost_family(1.0, "C9", 1.0)
