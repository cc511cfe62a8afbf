import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from isinggan.conditioning import T_MAX, make_strategy
from isinggan.ising import T_MIN
from isinggan.embed_stats import boxplot_stats, dead_fraction, dead_mask, sweep_activations, write_stats_csv


def sorted_quantile(row, q):
    """Linear interpolation between order statistics, written out by hand."""
    s = sorted(row)
    pos = q * (len(s) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (pos - lo) * (s[hi] - s[lo])


def test_sweep_shapes():
    s = make_strategy("binary-bits", 64, np.random.default_rng(0))
    assert sweep_activations(s, 1000).shape == (64, 1000)
    c = make_strategy("class-bin", 16, np.random.default_rng(0), num_classes=64)
    m = sweep_activations(c, 1000)
    assert m.shape == (16, 64) and len(np.unique(m.T, axis=0)) == 64
    with pytest.raises(ValueError):
        sweep_activations(s, 1)


def test_sweep_endpoints_are_range_ends():
    s = make_strategy("normalized-scalar", 4, np.random.default_rng(1))
    m = sweep_activations(s, 11)
    # batched and single-row float32 matmuls may differ in the last ulp
    np.testing.assert_allclose(m[:, 0], s.forward_encoded(np.zeros((1, 1), np.float32))[0], atol=1e-6)
    np.testing.assert_allclose(m[:, -1], s.embed(T_MAX), atol=1e-6)
    b = make_strategy("binary-bits", 4, np.random.default_rng(1))
    mb = sweep_activations(b, 11)
    np.testing.assert_allclose(mb[:, 0], b.embed(T_MIN), atol=1e-6)
    np.testing.assert_allclose(mb[:, -1], b.embed(T_MAX), atol=1e-6)


def test_boxplot_examples():
    st_ = boxplot_stats(np.arange(1.0, 10.0)[None])
    assert (st_.median[0], st_.q1[0], st_.q3[0]) == (5, 3, 7)
    const = boxplot_stats(np.full((1, 6), 0.3))
    assert const.q3[0] - const.q1[0] == 0 and const.whisker_lo[0] == const.whisker_hi[0] == 0.3
    one = boxplot_stats(np.array([[2.5]]))
    for name in ("min", "q1", "median", "q3", "max", "mean", "whisker_lo", "whisker_hi"):
        assert getattr(one, name)[0] == 2.5
    with pytest.raises(ValueError):
        boxplot_stats(np.empty((0, 0)))


def test_tukey_whiskers_exclude_outliers():
    row = np.array([1, 2, 3, 4, 5, 6, 7, 8, 100.0])
    s = boxplot_stats(row[None])
    assert s.whisker_hi[0] == 8 and s.max[0] == 100 and s.whisker_lo[0] == 1


def test_boxplot_matches_sort_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        row = rng.standard_cauchy(int(rng.integers(1, 60)))
        s = boxplot_stats(row[None])
        for q, got in ((0.25, s.q1[0]), (0.5, s.median[0]), (0.75, s.q3[0])):
            assert got == pytest.approx(sorted_quantile(row, q), rel=1e-12, abs=1e-12)
        iqr = s.q3[0] - s.q1[0]
        inside = [x for x in row if s.q1[0] - 1.5 * iqr <= x <= s.q3[0] + 1.5 * iqr]
        assert s.whisker_hi[0] == max(max(inside), s.q3[0])
        assert s.whisker_lo[0] == min(min(inside), s.q1[0])


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (3, 9), elements=st.floats(-1e6, 1e6)))
def test_stat_ordering(m):
    s = boxplot_stats(m)
    for chain in zip(s.min, s.whisker_lo, s.q1, s.median, s.q3, s.whisker_hi, s.max):
        assert all(a <= b for a, b in zip(chain, chain[1:]))


def test_dead_fraction_examples():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(10, 50))
    m[4] = 0.7
    assert dead_fraction(m) == pytest.approx(0.1)
    assert dead_fraction(np.eye(5)) == 0.0
    assert dead_fraction(np.ones((4, 9))) == 1.0
    assert dead_mask(np.array([[0, 5e-7], [0, 2e-6]])).tolist() == [True, False]
    with pytest.raises(ValueError):
        dead_fraction(m, tau=0)


def test_dead_fraction_column_permutation_invariant():
    rng = np.random.default_rng(1)
    m = rng.normal(size=(20, 30))
    m[::3] = m[::3, :1]
    assert dead_fraction(m) == dead_fraction(m[:, rng.permutation(30)])


def test_stats_csv(tmp_path):
    m = np.array([[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]])
    write_stats_csv(tmp_path / "s.csv", boxplot_stats(m), dead_mask(m))
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "neuron,min,q1,median,q3,max,mean,std,whisker_lo,whisker_hi,dead"
    assert lines[1].startswith("0,1.0,1.5,2.0,2.5,3.0,2.0,") and lines[1].endswith(",0")
    assert lines[2].endswith(",1")
