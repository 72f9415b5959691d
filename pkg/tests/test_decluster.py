"""Extremal index estimator and data preparation helpers."""

import numpy as np
import pandas as pd
import pytest

from evsmooth.decluster import (block_maxima, extremal_index, r_largest,
                                threshold_excesses)


def exceed_at(times, n):
    ind = np.zeros(n, dtype=bool)
    ind[np.asarray(times) - 1] = True
    return ind


class TestExtremalIndex:
    def test_hand_example_capped_second_branch(self):
        # exceedances at 1,2,5,6,9,10: gaps (1,3,1,3,1), max gap 3
        est = extremal_index(exceed_at([1, 2, 5, 6, 9, 10], 10),
                             times=np.arange(1, 11))
        np.testing.assert_array_equal(est.interexceedance,
                                      [1, 3, 1, 3, 1])
        assert est.branch == 2
        # uncapped second-branch value: 2*(sum(T-1))^2 / ((N-1)*sum((T-1)(T-2)))
        T = np.array([1, 3, 1, 3, 1.0])
        raw = 2.0 * np.sum(T - 1) ** 2 / (5 * np.sum((T - 1) * (T - 2)))
        assert abs(raw - 1.6) < 1e-12
        assert est.theta == 1.0
        assert est.n_exceedances == 6
        assert est.mean_cluster_size == 1.0

    def test_every_step_exceeds(self):
        est = extremal_index(np.ones(50, dtype=bool))
        assert est.branch == 1
        assert est.theta == 1.0

    def test_iid_bernoulli_is_near_one(self):
        rng = np.random.default_rng(2026)
        est = extremal_index(rng.uniform(size=10000) < 0.05)
        assert 0.9 <= est.theta <= 1.0

    def test_moving_maximum_near_half(self):
        # X_i = max(W_i, W_{i+1}) has extremal index 1/2: exceedances
        # arrive in clusters of mean size 2
        rng = np.random.default_rng(77)
        w = rng.uniform(size=20001)
        x = np.maximum(w[:-1], w[1:])
        ind = x > 0.995
        est = extremal_index(ind)
        # oracle from the second-branch formula written from scratch
        times = np.flatnonzero(ind).astype(float)
        T = np.diff(times)
        raw = (2.0 * np.sum(T - 1) ** 2
               / (len(T) * np.sum((T - 1) * (T - 2))))
        assert est.branch == 2
        assert abs(est.theta - min(1.0, raw)) < 1e-12
        assert 0.35 < est.theta < 0.65
        assert abs(est.mean_cluster_size - 1.0 / est.theta) < 1e-12

    def test_translation_invariance(self):
        rng = np.random.default_rng(8)
        ind = rng.uniform(size=300) < 0.2
        t = np.arange(300)
        a = extremal_index(ind, times=t)
        b = extremal_index(ind, times=t + 12345)
        assert a.theta == b.theta

    def test_gaps_in_record_matter(self):
        # same indicator, but stamps with a hole give longer gaps
        ind = exceed_at([1, 2, 3, 4], 4)
        dense = extremal_index(ind, times=np.array([1, 2, 3, 4]))
        gappy = extremal_index(ind, times=np.array([1, 2, 13, 14]))
        assert dense.branch == 1
        assert gappy.branch == 2
        assert dense.theta != gappy.theta or dense.branch != gappy.branch

    def test_datetime_stamps(self):
        days = np.array(["2020-01-01", "2020-01-02", "2020-01-05",
                         "2020-01-06", "2020-01-09", "2020-01-10"],
                        dtype="datetime64[D]")
        est = extremal_index(np.ones(6, dtype=bool), times=days)
        np.testing.assert_array_equal(est.interexceedance,
                                      [1, 3, 1, 3, 1])
        assert est.theta == 1.0

    def test_errors(self):
        with pytest.raises(ValueError, match="two exceedances"):
            extremal_index(exceed_at([4], 10))
        with pytest.raises(ValueError, match="increasing"):
            extremal_index(np.ones(3, dtype=bool),
                           times=np.array([1, 1, 2]))
        with pytest.raises(ValueError, match="length"):
            extremal_index(np.ones(3, dtype=bool), times=np.arange(5))


class TestBlockMaxima:
    def test_two_blocks(self):
        out = block_maxima({"b": [1, 1, 2], "y": [3.0, 5.0, 4.0]},
                           "b", "y")
        assert list(out["b"]) == [1, 2]
        assert list(out["y"]) == [5.0, 4.0]

    def test_single_block(self):
        out = block_maxima({"b": [1, 1, 1], "y": [2.0, 9.0, 4.0]},
                           "b", "y")
        assert list(out["y"]) == [9.0]

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(4)
        b = rng.integers(0, 7, 200)
        y = rng.normal(size=200)
        out = block_maxima({"b": b, "y": y}, "b", "y")
        for _, row in out.iterrows():
            assert row["y"] == max(yy for bb, yy in zip(b, y)
                                   if bb == row["b"])

    def test_missing_values_skipped_and_empty_block_dropped(self):
        with pytest.warns(UserWarning, match="no data"):
            out = block_maxima(
                {"b": [1, 1, 2, 2], "y": [np.nan, 3.0, np.nan, np.nan]},
                "b", "y")
        assert list(out["b"]) == [1]
        assert list(out["y"]) == [3.0]

    def test_multiple_keys(self):
        out = block_maxima({"a": [1, 1, 2], "b": [1, 2, 1],
                            "y": [5.0, 6.0, 7.0]}, ["a", "b"], "y")
        assert len(out) == 3


class TestThresholdExcesses:
    def test_hand_value(self):
        e = threshold_excesses([12.0], [11.4])
        assert abs(e[0] - 0.6) < 1e-12

    def test_equality_is_not_an_exceedance(self):
        e = threshold_excesses([5.0, 5.1], [5.0, 5.0])
        assert np.isnan(e[0])
        assert abs(e[1] - 0.1) < 1e-12

    def test_all_below(self):
        e = threshold_excesses([1.0, 2.0], [3.0, 3.0])
        assert np.all(np.isnan(e))

    def test_scalar_threshold_broadcasts(self):
        e = threshold_excesses([1.0, 4.0], 3.0)
        assert np.isnan(e[0]) and abs(e[1] - 1.0) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            threshold_excesses([1.0, 2.0], [1.0])


class TestRLargest:
    def test_full_group_when_r_is_minus_one(self):
        out = r_largest({"g": [1, 1, 1], "y": [3.0, 9.0, 5.0]}, "g", "y",
                        r=-1)
        assert list(out["y"]) == [9.0, 5.0, 3.0]

    def test_r1_equals_block_maxima(self):
        rng = np.random.default_rng(14)
        d = {"g": rng.integers(0, 5, 100), "y": rng.normal(size=100)}
        top = r_largest(d, "g", "y", r=1)
        bm = block_maxima(d, "g", "y")
        assert list(top["g"]) == list(bm["g"])
        np.testing.assert_allclose(top["y"], bm["y"], rtol=0, atol=0)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(15)
        g = rng.integers(0, 4, 120)
        y = rng.normal(size=120)
        out = r_largest({"g": g, "y": y}, "g", "y", r=5)
        for gg in np.unique(g):
            expect = sorted(y[g == gg], reverse=True)[:5]
            got = list(out.loc[out["g"] == gg, "y"])
            assert got == expect

    def test_short_group_warns(self):
        with pytest.warns(UserWarning, match="fewer than"):
            out = r_largest({"g": [1, 1, 2], "y": [1.0, 2.0, 3.0]},
                            "g", "y", r=2)
        assert len(out) == 3

    def test_ny_attachment(self):
        out = r_largest({"g": [1, 1, 2], "y": [1.0, 2.0, 3.0]}, "g", "y",
                        r=-1, ny={1: 30, 2: 28})
        assert list(out["ny"]) == [30, 30, 28]
        out2 = r_largest({"g": [1, 2]}, "g", "g", r=-1, ny=12)
        assert list(out2["ny"]) == [12.0, 12.0]
        with pytest.raises(ValueError, match="cover"):
            r_largest({"g": [1, 2], "y": [1.0, 2.0]}, "g", "y", r=-1,
                      ny={1: 30})

    def test_r_validation(self):
        with pytest.raises(ValueError):
            r_largest({"g": [1], "y": [1.0]}, "g", "y", r=0)


def test_prep_chain_feeds_fitting():
    """block_maxima output is directly fittable (plumbing check)."""
    from evsmooth import model
    from evsmooth.fit import fit

    rng = np.random.default_rng(100)
    year = np.repeat(np.arange(40), 50)
    y = rng.gumbel(10.0, 2.0, size=2000)
    bm = block_maxima({"year": year, "y": y}, "year", "y")
    spec = model.ModelSpec("gev", response="y", formulas=[[], [], []])
    m = fit(spec, bm)
    assert np.isfinite(m.meta["loglik"])
