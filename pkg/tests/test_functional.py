import math

import numpy as np
import pytest

from scalekit import DIMENSION, DomainError
from scalekit.functional import (
    FunctionClassSpec,
    GridFunction,
    LabelSequence,
    brute_force_net_count,
    bump,
    bump_seminorm,
    embed,
    holder_seminorm,
    level_amplitude,
    lipschitz_net_count,
    lipschitz_order_estimate,
    random_labels,
    verify_separation,
)

LIP = FunctionClassSpec(d=1, k=0, alpha=1.0)  # q = 1, base R = 6


def grid_fn(fn, step=2.0**-12):
    t = np.arange(round(1.0 / step) + 1) * step
    return GridFunction(step, fn(t))


class TestBump:
    def test_peak_value(self):
        assert bump(1.0, 0.5) == pytest.approx(1.0)
        assert bump(2.0, 0.5) == pytest.approx(1.0)

    def test_outside_support(self):
        assert bump(1.0, 0.0) == 0.0
        assert bump(1.0, 1.0) == 0.0
        assert bump(1.0, -0.3) == 0.0

    def test_quarter_point(self):
        assert bump(1.0, 0.25) == pytest.approx(0.75)  # (1/2) * (3/2)


class TestHolderSeminorm:
    def test_bump_lipschitz_constant(self):
        f = grid_fn(lambda t: bump(1.0, t))
        assert holder_seminorm(f, 0, 1.0) == pytest.approx(4.0, abs=1e-3)

    def test_constant_function(self):
        f = grid_fn(lambda t: np.zeros_like(t), step=2.0**-6)
        assert holder_seminorm(f, 0, 1.0) == 0.0

    def test_identity_slope(self):
        f = grid_fn(lambda t: t, step=2.0**-8)
        assert holder_seminorm(f, 0, 1.0) == pytest.approx(1.0)

    def test_fractional_alpha(self):
        # |sqrt(t) - sqrt(s)| <= |t - s|^0.5 with constant exactly 1
        f = grid_fn(np.sqrt, step=2.0**-8)
        val = holder_seminorm(f, 0, 0.5)
        assert 0.9 <= val <= 1.0 + 1e-9

    def test_too_coarse(self):
        from scalekit.errors import GridError

        f = GridFunction(1.0, np.array([0.0, 0.0]))
        with pytest.raises(GridError):
            holder_seminorm(f, 1, 1.0)

    def test_second_order_anchor(self):
        # q=2 bump: seminorm of the derivative is sup|phi''| = 32
        assert bump_seminorm(2.0) == pytest.approx(32.0, rel=1e-3)


class TestEmbedding:
    def test_zero_labels(self):
        labels = LabelSequence((np.zeros(6, dtype=int),), 6)
        f = embed(labels, LIP, 2.0**-10)
        assert np.all(f.values == 0.0)

    def test_single_bump_amplitude(self):
        # one +1 label at level 1: sup value is the level amplitude
        # 6 / (pi^2 * 6 * |phi|_1) with |phi|_1 = 4
        lab = np.zeros(6, dtype=int)
        lab[0] = 1
        f = embed(LabelSequence((lab,), 6), LIP, 2.0**-12)
        expected = 6.0 / (math.pi**2 * 6.0 * bump_seminorm(1.0))
        assert expected == pytest.approx(1.0 / (math.pi**2 * 4.0), rel=1e-3)
        assert float(np.max(f.values)) == pytest.approx(expected, rel=1e-6)
        assert float(np.max(f.values)) == pytest.approx(0.02533, abs=2e-4)

    def test_single_level_distance_identity(self):
        # sup distance at one differing level is exactly the amplitude times
        # the largest label difference, up to grid sampling error
        rng = np.random.default_rng(7)
        step = 2.0**-12
        for n in (1, 2, 3):
            spec_labels = []
            for m in (1, 2, 3):
                if m == n:
                    a = rng.integers(-1, 2, size=6**m)
                    b = rng.integers(-1, 2, size=6**m)
                else:
                    shared = rng.integers(-1, 2, size=6**m)
                    a = b = shared
                spec_labels.append((a, b))
            la = LabelSequence(tuple(a for a, _ in spec_labels), 6)
            lb = LabelSequence(tuple(b for _, b in spec_labels), 6)
            f_a, f_b = embed(la, LIP, step), embed(lb, LIP, step)
            lhs = float(np.max(np.abs(f_a.values - f_b.values)))
            diff = int(np.max(np.abs(la.levels[n - 1] - lb.levels[n - 1])))
            expected = level_amplitude(LIP, n) * diff
            # level-n part is 4 R^qn eps_n-Lipschitz; grid arg moves by <= step
            slack = 2 * step * 4 * 6**n * level_amplitude(LIP, n)
            assert abs(lhs - expected) <= slack

    def test_separation_identical(self):
        rng = np.random.default_rng(1)
        labels = random_labels(LIP, 2, rng)
        check = verify_separation(labels, labels, LIP, 2.0**-10)
        assert check.lhs == 0.0 and check.rhs == 0.0 and check.ok

    def test_separation_random_pairs(self):
        rng = np.random.default_rng(20240817)
        step = 2.0**-12
        for _ in range(200):
            la = random_labels(LIP, 3, rng)
            lb = random_labels(LIP, 3, rng)
            check = verify_separation(la, lb, LIP, step)
            assert check.ok

    def test_membership_bounds(self):
        rng = np.random.default_rng(11)
        labels = random_labels(LIP, 3, rng)
        f = embed(labels, LIP, 2.0**-12)
        amp_sum = sum(level_amplitude(LIP, n) for n in (1, 2, 3))
        assert float(np.max(np.abs(f.values))) <= amp_sum + 1e-12
        assert holder_seminorm(f, 0, 1.0) <= 1.0 + 0.05

    def test_rejects_higher_dimension(self):
        with pytest.raises(DomainError):
            embed(LabelSequence((np.zeros(6, dtype=int),), 6),
                  FunctionClassSpec(d=2, k=0, alpha=1.0), 2.0**-8)


class TestNetCount:
    @pytest.mark.parametrize("eps", [1.0, 0.5, 0.25])
    def test_dp_matches_enumeration(self, eps):
        log_count, regime = lipschitz_net_count(eps)
        assert regime == "exact"
        assert log_count == pytest.approx(math.log(brute_force_net_count(eps)), abs=1e-10)

    def test_eps_one_count(self):
        # 3 start values, middle allows 3 steps, edges allow 2: 7 functions
        assert brute_force_net_count(1.0) == 7

    def test_monotone_growth(self):
        logs = [lipschitz_net_count(2.0**-m)[0] for m in range(0, 9)]
        assert all(b > a for a, b in zip(logs, logs[1:]))

    def test_order_estimate_near_one(self):
        est = lipschitz_order_estimate([2.0**-m for m in range(3, 13)], tail_window=4)
        assert 0.85 <= est.lower <= 1.15
        assert 0.85 <= est.upper <= 1.15

    def test_dimension_family_diverges(self):
        # with the power family the exponential counts have no limit: the
        # estimate runs upward without bound as the grid deepens (reported,
        # never asserted as a value)
        from scalekit.scaling import scale_estimate_from_counts

        def estimate(depth):
            eps = [2.0**-m for m in range(3, depth)]
            logs = [lipschitz_net_count(e)[0] for e in eps]
            return scale_estimate_from_counts(np.array(eps), np.array(logs),
                                              DIMENSION, tail_window=4)

        shallow, deep = estimate(11), estimate(14)
        assert shallow.upper > 100.0
        assert deep.upper > 2 * shallow.upper

    def test_minimal_tail_window(self):
        est = lipschitz_order_estimate([0.5, 0.25], tail_window=2)
        assert math.isfinite(est.lower) and math.isfinite(est.upper)

    def test_rejects_non_reciprocal(self):
        with pytest.raises(DomainError):
            lipschitz_net_count(0.3)
