import numpy as np
import pytest
from scipy.stats import chisquare

from egobatch import Domain, PoolExhaustedError, ShiftedPool, resample, weigh
from egobatch.sir import WeightedPool

UNIT2 = Domain([0.0, 0.0], [1.0, 1.0])


class _FixedEi:
    def __init__(self, values):
        self._values = np.asarray(values, dtype=float)

    def batch(self, X):
        return self._values.copy()


def shifted(points):
    points = np.asarray(points, dtype=float)
    return ShiftedPool(points, UNIT2, np.zeros(points.shape[1]))


def weighted(points, weights, degenerate=False):
    points = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    return WeightedPool(points, UNIT2, w, w.copy(), degenerate)


THREE = [[0.1, 0.1], [0.5, 0.5], [0.9, 0.9]]


class TestWeigh:
    def test_normalization(self):
        wp = weigh(shifted(THREE), _FixedEi([2.0, 1.0, 1.0]))
        assert np.allclose(wp.weights, [0.5, 0.25, 0.25], atol=0)
        assert not wp.degenerate
        assert abs(wp.weights.sum() - 1.0) < 1e-12

    def test_equal_ei_gives_uniform(self):
        wp = weigh(shifted(THREE), _FixedEi([0.7, 0.7, 0.7]))
        assert np.allclose(wp.weights, 1 / 3)

    def test_all_zero_ei_degenerate_uniform(self):
        wp = weigh(shifted(THREE), _FixedEi([0.0, 0.0, 0.0]))
        assert wp.degenerate
        assert np.allclose(wp.weights, 1 / 3)
        assert np.array_equal(wp.raw_ei, [0.0, 0.0, 0.0])

    def test_weights_nonnegative_sum_one(self):
        rng = np.random.default_rng(0)
        raw = rng.random(50)
        wp = weigh(shifted(rng.random((50, 2))), _FixedEi(raw))
        assert np.all(wp.weights >= 0)
        assert abs(wp.weights.sum() - 1.0) < 1e-12


class TestResample:
    def test_whole_pool_when_j_equals_m(self):
        wp = weighted(THREE, [0.5, 0.3, 0.2])
        out = resample(wp, 3, np.random.default_rng(0))
        assert sorted(out.tolist()) == sorted(np.asarray(THREE, dtype=float).tolist())

    def test_point_mass_always_wins(self):
        wp = weighted(THREE, [1.0, 0.0, 0.0])
        for seed in range(200):
            out = resample(wp, 1, np.random.default_rng(seed))
            assert np.array_equal(out[0], [0.1, 0.1])

    def test_first_draw_frequencies_chi_square(self):
        wp = weighted(THREE, [0.5, 0.3, 0.2])
        rng = np.random.default_rng(123)
        counts = np.zeros(3, dtype=int)
        n = 100_000
        for _ in range(n):
            out = resample(wp, 1, rng)
            counts[int(np.argmin(np.abs(wp.points[:, 0] - out[0][0])))] += 1
        stat, p = chisquare(counts, f_exp=np.array([0.5, 0.3, 0.2]) * n)
        assert p > 0.001

    def test_without_replacement_no_duplicates(self):
        rng_pool = np.random.default_rng(5)
        pts = rng_pool.random((12, 2))
        w = rng_pool.random(12)
        wp = weighted(pts, w / w.sum())
        for seed in range(1000):
            out = resample(wp, 6, np.random.default_rng(seed))
            assert len({tuple(p) for p in out.tolist()}) == 6

    def test_outputs_are_subset_of_pool(self):
        rng = np.random.default_rng(8)
        pts = rng.random((20, 2))
        w = rng.random(20)
        wp = weighted(pts, w / w.sum())
        out = resample(wp, 10, np.random.default_rng(1))
        pool_rows = {tuple(p) for p in pts.tolist()}
        assert all(tuple(p) in pool_rows for p in out.tolist())

    def test_exclusions_never_appear(self):
        wp = weighted(THREE, [0.4, 0.4, 0.2])
        for seed in range(100):
            out = resample(wp, 2, np.random.default_rng(seed), exclusions=[[0.5, 0.5]])
            assert [0.5, 0.5] not in out.tolist()

    def test_pool_exhausted(self):
        wp = weighted(THREE, [0.4, 0.4, 0.2])
        with pytest.raises(PoolExhaustedError):
            resample(wp, 3, np.random.default_rng(0), exclusions=[[0.5, 0.5]])

    def test_single_admissible_point_boundary(self):
        wp = weighted(THREE, [0.4, 0.4, 0.2])
        out = resample(
            wp, 1, np.random.default_rng(0), exclusions=[[0.5, 0.5], [0.9, 0.9]]
        )
        assert np.array_equal(out[0], [0.1, 0.1])
        with pytest.raises(PoolExhaustedError):
            resample(wp, 2, np.random.default_rng(0), exclusions=[[0.5, 0.5], [0.9, 0.9]])

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(3)
        pts = rng.random((15, 2))
        w = rng.random(15)
        wp = weighted(pts, w / w.sum())
        a = resample(wp, 5, np.random.default_rng(77))
        b = resample(wp, 5, np.random.default_rng(77))
        assert np.array_equal(a, b)

    def test_zero_weight_survivors_drawn_uniformly_when_needed(self):
        # all the weight sits on excluded points: fall back to uniform draws
        wp = weighted(THREE, [1.0, 0.0, 0.0])
        out = resample(wp, 2, np.random.default_rng(2), exclusions=[[0.1, 0.1]])
        assert len(out) == 2
