import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from kbench.stats import (Aggregate, PairedSample, aggregate, signed_ranks, significance_star,
                          spearman, wilcoxon_signed_rank)
from oracles import spearman_bruteforce, wilcoxon_bruteforce


def sample(b, c):
    return PairedSample(tuple(str(i) for i in range(len(b))), b, c)


def test_all_positive_m6():
    res = wilcoxon_signed_rank(sample(np.zeros(6), np.arange(1, 7)), "greater")
    assert res.p_value == 1 / 64
    assert res.statistic == 21


def test_identical_gives_p_one_with_warning():
    res = wilcoxon_signed_rank(sample(np.ones(5), np.ones(5)))
    assert res.p_value == 1.0 and res.warning


def test_exact_against_bruteforce(rng):
    for _ in range(60):
        m = int(rng.integers(1, 11))
        b = rng.integers(0, 5, m).astype(float)
        c = rng.integers(0, 5, m).astype(float)
        if np.all(b == c):
            continue
        w, pg, pl, p2 = wilcoxon_bruteforce(b, c)
        s = sample(b, c)
        assert wilcoxon_signed_rank(s, "greater").statistic == pytest.approx(w)
        assert abs(wilcoxon_signed_rank(s, "greater").p_value - pg) < 1e-12
        assert abs(wilcoxon_signed_rank(s, "less").p_value - pl) < 1e-12
        assert abs(wilcoxon_signed_rank(s, "two_sided").p_value - p2) < 1e-12


def test_matches_scipy_without_ties(rng):
    for _ in range(10):
        b, c = rng.random(12), rng.random(12)
        for alt, name in (("greater", "greater"), ("two_sided", "two-sided")):
            ref = sps.wilcoxon(c, b, alternative=name, method="exact").pvalue
            assert wilcoxon_signed_rank(sample(b, c), alt).p_value == pytest.approx(ref, abs=1e-12)


def test_antisymmetry(rng):
    b, c = rng.random(9), rng.random(9)
    fwd, rev = sample(b, c), sample(c, b)
    assert wilcoxon_signed_rank(fwd, "greater").p_value == pytest.approx(
        wilcoxon_signed_rank(rev, "less").p_value, abs=1e-15)
    assert wilcoxon_signed_rank(fwd).p_value == pytest.approx(wilcoxon_signed_rank(rev).p_value, abs=1e-15)


def test_normal_close_to_exact_at_20(rng):
    for _ in range(10):
        b, c = rng.random(20), rng.random(20) + 0.1
        s = sample(b, c)
        for alt in ("greater", "two_sided"):
            ex = wilcoxon_signed_rank(s, alt, exact=True).p_value
            ap = wilcoxon_signed_rank(s, alt, exact=False).p_value
            assert abs(ex - ap) < 0.01


def test_large_sample_uses_normal(rng):
    res = wilcoxon_signed_rank(sample(rng.random(30), rng.random(30)))
    assert res.method == "normal" and 0 <= res.p_value <= 1


def test_signed_ranks_ties():
    ranks, signs = signed_ranks([0, -2, 2, 1])
    assert ranks.tolist() == [2.5, 2.5, 1.0]
    assert signs.tolist() == [-1, 1, 1]


def test_paired_sample_validation():
    with pytest.raises(ValueError):
        sample([], [])
    with pytest.raises(ValueError):
        PairedSample(("a",), [1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        sample([1.0, np.nan], [1.0, 2.0])
    s = PairedSample.from_mappings({"b": 1.0, "a": 2.0}, {"a": 3.0, "b": 1.5})
    assert s.case_ids == ("a", "b") and s.differences.tolist() == [1.0, 0.5]
    with pytest.raises(ValueError, match="both sides"):
        PairedSample.from_mappings({"a": 1.0}, {"b": 1.0})
    with pytest.raises(ValueError):
        wilcoxon_signed_rank(sample([1.0], [2.0]), "bigger")


def test_star_rule():
    assert significance_star(0.005)
    assert not significance_star(0.01)
    assert not significance_star(0.5)
    assert not significance_star(0.001, median_difference=-0.1)
    assert not significance_star(0.001, median_difference=0.0)


def test_spearman_perfect():
    x = np.arange(10.0)
    assert spearman(x, x**3).rho == pytest.approx(1.0)
    assert spearman(x, -x).rho == pytest.approx(-1.0)


def test_spearman_bruteforce_oracle(rng):
    for n in (3, 4, 5, 6):
        for _ in range(8):
            x = rng.integers(0, 4, n).astype(float)
            y = rng.random(n)
            if np.all(x == x[0]):
                continue
            rho, p = spearman_bruteforce(x, y)
            res = spearman(x, y)
            assert res.rho == pytest.approx(rho, abs=1e-12)
            assert res.p_value == pytest.approx(p, abs=1e-12)
            assert res.method == "exact"


def test_spearman_t_approx_matches_scipy(rng):
    x, y = rng.random(25), rng.random(25)
    ref = sps.spearmanr(x, y)
    res = spearman(x, y)
    assert res.rho == pytest.approx(ref.statistic, abs=1e-12)
    assert res.p_value == pytest.approx(ref.pvalue, abs=1e-10)


@given(st.lists(st.integers(-100, 100), min_size=4, max_size=15, unique=True),
       st.lists(st.integers(-100, 100), min_size=4, max_size=15, unique=True))
def test_spearman_rank_invariance(x, y):
    n = min(len(x), len(y))
    x, y = np.array(x[:n], float), np.array(y[:n], float)
    a = spearman(x, y)
    b = spearman(np.exp(x / 50), y**3)
    assert a.rho == pytest.approx(b.rho, abs=1e-12)


def test_spearman_validation():
    with pytest.raises(ValueError, match="constant"):
        spearman([1, 1, 1, 1], [1, 2, 3, 4])
    with pytest.raises(ValueError):
        spearman([1, 2], [1, 2])
    with pytest.raises(ValueError):
        spearman([1, 2, 3], [1, 2])


def test_aggregate(rng):
    assert aggregate([1, 1, 1]) == Aggregate(1.0, 0.0, 3)
    a = aggregate([0, 1])
    assert a.mean == 0.5 and a.std == pytest.approx(0.7071067811865476, abs=1e-15)
    one = aggregate([3.0])
    assert one.std == 0.0 and one.flag
    v = rng.random(50)
    mean = sum(v) / len(v)
    var = sum((x - mean) ** 2 for x in v) / (len(v) - 1)
    agg = aggregate(v)
    assert abs(agg.mean - mean) < 1e-12 and abs(agg.std - math.sqrt(var)) < 1e-12
    with pytest.raises(ValueError):
        aggregate([])
