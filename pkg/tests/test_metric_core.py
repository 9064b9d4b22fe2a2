import math

import numpy as np
import pytest

from scalekit import DIMENSION, ORDER, DomainError, SizeError
from scalekit.metric_core import (
    FiniteMetricSpace,
    covering_number_exact,
    covering_number_greedy,
    default_radius_menu,
    gauge_value,
    greedy_cover,
    greedy_packing,
    hausdorff_premeasure,
    load_distance_csv,
    load_points_csv,
    packing_number_exact,
    packing_number_greedy,
    packing_premeasure,
)


def line_space(n=5):
    return FiniteMetricSpace.from_points(np.arange(n, dtype=float)[:, None])


def random_cloud(rng, n=8, dim=2):
    return FiniteMetricSpace.from_points(rng.random((n, dim)))


def brute_force_cover_cost(space, menu, alpha=1.0):
    """Independent oracle: enumerate every subset of (center, radius) balls."""
    from itertools import combinations

    items = [(c, r) for c in range(space.n) for r in menu]
    best = float("inf")
    for k in range(1, len(items) + 1):
        for sub in combinations(items, k):
            covered = set()
            cost = 0.0
            for c, r in sub:
                covered.update(np.flatnonzero(space.dist[c] < r).tolist())
                cost += gauge_value(DIMENSION, alpha, r)
            if len(covered) == space.n:
                best = min(best, cost)
    return best


class TestSpaceConstruction:
    def test_rejects_asymmetric(self):
        d = np.array([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(DomainError):
            FiniteMetricSpace.create(["a", "b"], d)

    def test_rejects_triangle_violation(self):
        d = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]])
        with pytest.raises(DomainError):
            FiniteMetricSpace.create(list("abc"), d)
        # the flag skips the O(n^3) validation
        FiniteMetricSpace.create(list("abc"), d, check_triangle=False)

    def test_rejects_nonzero_diagonal(self):
        d = np.array([[0.1, 1.0], [1.0, 0.0]])
        with pytest.raises(DomainError):
            FiniteMetricSpace.create(["a", "b"], d)


class TestCoveringNumbers:
    def test_line_exact(self):
        # B(1, 1.1) and B(3, 1.1) cover {0..4}
        assert covering_number_exact(line_space(), 1.1) == 2

    def test_singleton(self):
        space = line_space(1)
        assert covering_number_exact(space, 0.5) == 1
        assert covering_number_greedy(space, 0.5) == 1

    def test_two_far_points(self):
        space = FiniteMetricSpace.from_points(np.array([[0.0], [10.0]]))
        assert covering_number_exact(space, 1.0) == 2

    def test_greedy_traced_on_line(self):
        # counts are [2,3,3,3,2]; ties break to the lowest center, so greedy
        # takes 1 (covers {0,1,2}) and then 3 (covers {2,3,4}): optimal here
        cover = greedy_cover(line_space(), 1.1)
        assert cover.centers == (1, 3)
        assert covering_number_greedy(line_space(), 1.1) == 2

    def test_greedy_covers_everything(self):
        rng = np.random.default_rng(3)
        space = random_cloud(rng, 12)
        cover = greedy_cover(space, 0.3)
        assert cover.covers(space)

    def test_one_ball_above_diameter(self):
        space = line_space()
        assert covering_number_greedy(space, space.diameter + 1) == 1

    def test_size_cap(self):
        rng = np.random.default_rng(0)
        space = random_cloud(rng, 25)
        with pytest.raises(SizeError):
            covering_number_exact(space, 0.5)


class TestPackingNumbers:
    def test_line_exact(self):
        assert packing_number_exact(line_space(), 1.1) == 3  # {0, 2, 4}

    def test_small_eps_keeps_everything(self):
        assert packing_number_exact(line_space(), 0.5) == 5
        assert packing_number_greedy(line_space(), 0.5) == 5

    def test_singleton(self):
        assert packing_number_exact(line_space(1), 2.0) == 1

    def test_greedy_scan_trace(self):
        # keep 0, skip 1, keep 2, skip 3, keep 4
        assert greedy_packing(line_space(), 1.1) == [0, 2, 4]


class TestSandwichAndBounds:
    def test_sandwich_on_random_clouds(self):
        # pack(2 eps) <= cover(eps) <= pack(eps), 100 seeded 8-point clouds
        rng = np.random.default_rng(20240817)
        for _ in range(100):
            space = random_cloud(rng, 8)
            for eps in rng.uniform(0.05, 1.2, size=10):
                n_cov = covering_number_exact(space, eps)
                assert packing_number_exact(space, 2 * eps) <= n_cov
                assert n_cov <= packing_number_exact(space, eps)

    def test_greedy_bounds(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            space = random_cloud(rng, 10)
            eps = rng.uniform(0.1, 0.9)
            assert packing_number_greedy(space, eps) <= packing_number_exact(space, eps)
            assert covering_number_greedy(space, eps) >= covering_number_exact(space, eps)
            # a maximal separated set is a net, so greedy cover <= greedy packing
            assert covering_number_greedy(space, eps) <= packing_number_greedy(space, eps)

    def test_exact_counts_monotone_in_eps(self):
        # the exact quantities are provably non-increasing in eps; the greedy
        # heuristics are not (rare order effects), only their bounds hold
        rng = np.random.default_rng(11)
        for _ in range(10):
            space = random_cloud(rng, 10)
            grid = np.sort(rng.uniform(0.05, 1.5, size=8))
            for fn in (covering_number_exact, packing_number_exact):
                vals = [fn(space, e) for e in grid]
                assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_greedy_ln_bound(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            space = random_cloud(rng, 12)
            eps = rng.uniform(0.1, 0.8)
            exact = covering_number_exact(space, eps)
            greedy = covering_number_greedy(space, eps)
            assert exact <= greedy <= exact * (1 + np.log(space.n))


class TestGauge:
    def test_power_gauge_extends_past_one(self):
        assert gauge_value(DIMENSION, 1.0, 1.1) == pytest.approx(1.1)
        assert gauge_value(DIMENSION, 2.0, 0.5) == pytest.approx(0.25)

    def test_double_exp_gauge_extends(self):
        assert gauge_value(ORDER, 1.0, 2.0) == pytest.approx(math.exp(-0.5))

    def test_deep_log_gauge_rejects_large_radius(self):
        from scalekit import ScalingFamily

        with pytest.raises(DomainError):
            gauge_value(ScalingFamily(1, 2), 1.0, 1.5)


class TestHausdorffPremeasure:
    def test_line_single_radius(self):
        # two balls of radius 1.1, each weighing 1.1
        val = hausdorff_premeasure(line_space(), DIMENSION, 1.0, [1.1])
        assert val == pytest.approx(2.2)

    def test_singleton(self):
        val = hausdorff_premeasure(line_space(1), DIMENSION, 1.0, [0.7])
        assert val == pytest.approx(0.7)

    def test_mixed_menu(self):
        # the optimum mixes radii: B(1,1.1) + B(3,0.5) + B(4,0.5) costs 2.1,
        # beating both uniform-radius covers (2.5 and 2.2); value frozen from
        # the subset-enumeration oracle below
        val = hausdorff_premeasure(line_space(), DIMENSION, 1.0, [0.5, 1.1])
        assert val == pytest.approx(2.1)
        assert val == pytest.approx(brute_force_cover_cost(line_space(), [0.5, 1.1]))

    def test_upper_bound_by_trivial_cover(self):
        rng = np.random.default_rng(5)
        space = random_cloud(rng, 9)
        menu = default_radius_menu(space, 0.8)
        val = hausdorff_premeasure(space, DIMENSION, 1.0, menu)
        assert val <= space.n * max(gauge_value(DIMENSION, 1.0, r) for r in menu) + 1e-12

    def test_rejects_empty_menu(self):
        with pytest.raises(DomainError):
            hausdorff_premeasure(line_space(), DIMENSION, 1.0, [])

    def test_greedy_regime_still_covers(self):
        rng = np.random.default_rng(9)
        space = random_cloud(rng, 20)  # above the exact cap of 14
        val = hausdorff_premeasure(space, DIMENSION, 1.0, [0.2, 0.5])
        assert val > 0


class TestPackingPremeasure:
    def test_line_all_centers_fit(self):
        # radius 0.4 balls: separation needs d >= 0.8, all 5 centers work
        val = packing_premeasure(line_space(), DIMENSION, 1.0, [0.4])
        assert val == pytest.approx(2.0)

    def test_singleton(self):
        val = packing_premeasure(line_space(1), DIMENSION, 1.0, [0.3])
        assert val == pytest.approx(0.3)

    def test_two_points_one_ball(self):
        space = FiniteMetricSpace.from_points(np.array([[0.0], [1.0]]))
        val = packing_premeasure(space, DIMENSION, 1.0, [0.6])
        assert val == pytest.approx(0.6)

    def test_lower_bound_single_ball(self):
        rng = np.random.default_rng(13)
        space = random_cloud(rng, 6)
        menu = [0.1, 0.25]
        val = packing_premeasure(space, DIMENSION, 1.0, menu)
        assert val >= gauge_value(DIMENSION, 1.0, min(menu)) - 1e-12

    def test_greedy_regime(self):
        rng = np.random.default_rng(17)
        space = random_cloud(rng, 16)
        val = packing_premeasure(space, DIMENSION, 1.0, [0.05, 0.1, 0.2, 0.4])
        assert val > 0


class TestCsvLoaders:
    def test_distance_roundtrip(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b,c\n0,1,2\n1,0,1\n2,1,0\n")
        space = load_distance_csv(path)
        assert space.labels == ("a", "b", "c")
        assert space.dist[0, 2] == 2.0

    def test_points_with_weights(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("x,y,weight\n0,0,2\n1,0,1\n1,1,1\n")
        space, weights = load_points_csv(path, metric="sup")
        assert space.n == 3
        assert weights.tolist() == [2.0, 1.0, 1.0]
        assert space.dist[0, 2] == pytest.approx(1.0)  # sup metric

    def test_headerless_points(self, tmp_path):
        path = tmp_path / "q.csv"
        path.write_text("0,0\n3,4\n")
        space, weights = load_points_csv(path)
        assert space.dist[0, 1] == pytest.approx(5.0)
        assert weights.tolist() == [1.0, 1.0]
