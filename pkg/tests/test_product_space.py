import math

import numpy as np
import pytest

from scalekit import DepthError, DomainError, ORDER, SizeError
from scalekit.measure import local_mass
from scalekit.metric_core import covering_number_greedy
from scalekit.product_space import (
    ProductSpaceSpec,
    exact_ball_mass_log,
    exact_covering_log,
    inhomogeneous_orders,
    inhomogeneous_spec,
    lambda_sequence,
    materialize,
    uniform_spec,
)
from scalekit.scaling import ratio_estimate, scale_estimate_from_counts


class TestClosedForms:
    def test_covering_log_binary(self):
        spec = uniform_spec(2, 12)
        assert exact_covering_log(spec, 3) == pytest.approx(math.log(8))

    def test_covering_log_single(self):
        spec = uniform_spec(5, 4)
        assert exact_covering_log(spec, 1) == pytest.approx(math.log(5))

    def test_empty_prefix(self):
        spec = uniform_spec(2, 4)
        assert exact_covering_log(spec, 0) == 0.0
        assert exact_ball_mass_log(spec, 0) == 0.0

    def test_ball_mass_inverse(self):
        spec = uniform_spec(2, 6)
        assert exact_ball_mass_log(spec, 3) == pytest.approx(-math.log(8))

    def test_mixed_cards(self):
        spec = ProductSpaceSpec(np.log([3.0, 4.0]), np.array([-1.0, -2.0]))
        assert exact_ball_mass_log(spec, 2) == pytest.approx(-math.log(12))

    def test_json_roundtrip(self):
        spec = inhomogeneous_spec(2.0, 1.0, 30)
        again = ProductSpaceSpec.from_json(spec.to_json())
        assert np.allclose(again.log_eps, spec.log_eps)
        assert again.metadata["c"] == 3


class TestLambdaSequence:
    def test_exponential_cards(self):
        # log Card Z_k = e^k; lambda_30 = log(sum e^k) / 30 (C = e)
        spec = ProductSpaceSpec(np.exp(np.arange(1.0, 31.0)),
                                -np.arange(1.0, 31.0))
        lam = lambda_sequence(spec, math.e)
        expected = math.log(np.sum(np.exp(np.arange(1.0, 31.0)))) / 30.0
        assert lam[-1] == pytest.approx(expected, rel=1e-12)
        assert abs(lam[-1] - 1.0) < 0.05

    def test_constant_cards_vanish(self):
        spec = ProductSpaceSpec(np.ones(50), -np.arange(1.0, 51.0))
        lam = lambda_sequence(spec, math.e)
        # lambda_n = log(n * log M)/n -> 0; with M = e this is log(n)/n
        assert lam[49] == pytest.approx(math.log(50) / 50)
        assert lam[49] < 0.12

    def test_single_term(self):
        # Card = exp(e): lambda_1 = log(log Card)/log C = 1 for C = e
        spec = ProductSpaceSpec(np.array([math.e]), np.array([-1.0]))
        lam = lambda_sequence(spec, math.e)
        assert lam[0] == pytest.approx(1.0)

    def test_rejects_bad_C(self):
        spec = uniform_spec(2, 5)
        with pytest.raises(DomainError):
            lambda_sequence(spec, 1.0)


class TestInhomogeneousSpec:
    def test_block_layout_alpha2_beta1(self):
        spec = inhomogeneous_spec(2.0, 1.0, 30)
        assert spec.metadata["c"] == 3
        # k in [1,3) slow block, [3,9) fast, [9,27) slow, [27,...) fast
        assert spec.log_log_cards[0] == pytest.approx(math.log(math.log(math.floor(math.exp(math.e)))))
        # k=4 is in the fast block: rate alpha=2 (floor still exact at k=2? no: 2*4=8 > log log 1e15)
        assert spec.log_log_cards[3] == pytest.approx(8.0)
        assert spec.log_log_cards[8] == pytest.approx(9.0)   # k=9 slow block
        assert spec.log_log_cards[26] == pytest.approx(54.0)  # k=27 fast block

    def test_equal_rates_single_branch(self):
        spec = inhomogeneous_spec(1.0, 1.0, 10)
        assert spec.metadata["c"] == 2
        # all blocks use rate 1: log log Card = k (where the floor is dropped)
        assert spec.log_log_cards[9] == pytest.approx(10.0)

    def test_c_from_ratio(self):
        assert inhomogeneous_spec(2.5, 1.0, 10).metadata["c"] == 3

    def test_orders_split(self):
        spec = inhomogeneous_spec(2.0, 1.0, 3**8 - 1)
        lower, upper = inhomogeneous_orders(spec)
        assert abs(lower - 1.0) < 0.15
        assert abs(upper - 2.0) < 0.15

    def test_orders_homogeneous(self):
        spec = inhomogeneous_spec(1.0, 1.0, 2**8 - 1)
        lower, upper = inhomogeneous_orders(spec)
        assert abs(lower - 1.0) < 0.05
        assert abs(upper - 1.0) < 0.05

    def test_too_shallow(self):
        spec = inhomogeneous_spec(2.0, 1.0, 100)
        with pytest.raises(DepthError):
            inhomogeneous_orders(spec)


class TestMaterialize:
    def test_binary_depth3(self):
        spec = uniform_spec(2, 3)
        space, mu = materialize(spec, 3)
        assert space.n == 8
        i000 = space.labels.index("000")
        i001 = space.labels.index("001")
        i100 = space.labels.index("100")
        assert space.dist[i000, i001] == pytest.approx(math.exp(-3))
        assert space.dist[i000, i100] == pytest.approx(math.exp(-1))
        assert np.all(np.diagonal(space.dist) == 0)

    def test_three_point_star(self):
        spec = uniform_spec(3, 1)
        space, _ = materialize(spec, 1)
        assert space.n == 3
        off = space.dist[np.triu_indices(3, 1)]
        assert np.allclose(off, math.exp(-1))

    def test_ultrametric(self):
        spec = uniform_spec(3, 4)
        space, _ = materialize(spec, 4)
        d = space.dist
        n = space.n
        for k in range(n):
            assert np.all(d <= np.maximum(d[:, k:k + 1], d[k:k + 1, :]) + 1e-15)

    def test_size_cap(self):
        spec = uniform_spec(2, 15)
        with pytest.raises(SizeError):
            materialize(spec, 15)

    def test_non_integer_cards_rejected(self):
        spec = ProductSpaceSpec(np.array([1.0]), np.array([-1.0]))
        with pytest.raises(DomainError):
            materialize(spec, 1)


class TestOracleAgreement:
    @pytest.mark.parametrize("card,depth", [(2, 10), (3, 7)])
    def test_covering_matches_closed_form(self, card, depth):
        spec = uniform_spec(card, depth)
        space, _ = materialize(spec, depth)
        for n in range(1, depth + 1):
            eps = math.exp(spec.log_eps[n - 1])
            expected = round(math.exp(exact_covering_log(spec, n)))
            assert covering_number_greedy(space, eps) == expected

    def test_ball_mass_matches(self):
        spec = uniform_spec(2, 8)
        space, mu = materialize(spec, 8)
        for n in range(1, 9):
            eps = math.exp(spec.log_eps[n - 1])
            expected = math.exp(exact_ball_mass_log(spec, n))
            for x in (0, 17, space.n - 1):
                assert local_mass(mu, x, eps) == pytest.approx(expected, rel=1e-12)

    def test_local_matches_box_double_exp_family(self):
        # the ball-mass estimate equals the covering estimate within 0.1
        spec = uniform_spec(2, 12)
        space, mu = materialize(spec, 12)
        eps = np.exp(spec.log_eps)
        log_counts = np.array([exact_covering_log(spec, n) for n in range(1, 13)])
        box = scale_estimate_from_counts(eps, log_counts, ORDER, tail_window=8)
        masses = np.array([local_mass(mu, 0, e) for e in eps])
        loc = scale_estimate_from_counts(eps, -np.log(masses), ORDER, tail_window=8)
        assert abs(box.lower - loc.lower) < 0.1
        assert abs(box.upper - loc.upper) < 0.1

    def test_ratio_and_threshold_agree_on_oracles(self):
        # agreement tightens with depth; these oracle depths sit within 0.05
        for card, depth in [(2, 20), (3, 24)]:
            spec = uniform_spec(card, depth)
            eps = np.exp(spec.log_eps)
            log_counts = np.cumsum(spec.log_cards)
            est = scale_estimate_from_counts(eps, log_counts, ORDER, tail_window=8)
            ratio = ratio_estimate(eps_grid=eps, log_counts=log_counts, p=2, q=1,
                                   tail_window=8)
            assert abs(est.lower - ratio.lower) < 0.05
            assert abs(est.upper - ratio.upper) < 0.05
