"""Empirical measures: local mass profiles, quantization, scale reports.

Quantization centers are restricted to the support of the measure (on
empirical data the support is exactly the loaded points).  Estimates from
the heuristic k-median regime carry an explicit 'heuristic-upper-bound'
flag so the theorem harness never asserts an inequality with the
wrong-direction bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .metric_core import (
    EXACT_COUNT_CAP,
    FiniteMetricSpace,
    covering_number_exact,
    covering_number_greedy,
)
from .parallel import parallel_map
from .scaling import (
    ScaleEstimate,
    ScalingFamily,
    scale_estimate_from_counts,
    threshold_alpha_batch,
)

EXACT_SUBSET_CAP = 10**6  # exhaustive center-subset search budget


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Non-negative weights over the points of a finite metric space."""

    space: FiniteMetricSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.space.n,):
            raise DomainError("weights must match the space size")
        if np.any(w < 0):
            raise DomainError("weights must be non-negative")
        if w.sum() <= 0:
            raise DomainError("total mass must be positive")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, space):
        return cls(space, np.full(space.n, 1.0 / space.n))

    @classmethod
    def dirac(cls, space, index):
        w = np.zeros(space.n)
        w[index] = 1.0
        return cls(space, w)

    @property
    def total_mass(self):
        return float(self.weights.sum())

    @property
    def support(self):
        return np.flatnonzero(self.weights > 0)


class QuantizationNumber(NamedTuple):
    n: int
    heuristic: bool


@dataclass(frozen=True)
class QuantizerResult:
    """Chosen centers with their average-distance cost."""

    centers: tuple
    cost: float
    n_requested: int
    exhaustive: bool

    def validate(self, mu, tol=1e-12):
        again = quantization_cost(mu, self.centers)
        scale = max(1.0, abs(self.cost))
        if abs(again - self.cost) > tol * scale:
            raise DomainError(f"stored cost {self.cost} != recomputed {again}")
        return True


def local_mass(mu, x, eps):
    """Mass of the open ball around point x."""
    if not 0 <= x < mu.space.n:
        raise IndexError(f"point index {x} out of range")
    return float(mu.weights[mu.space.dist[x] < eps].sum())


def _local_mass_matrix(mu, points, eps_grid):
    d = mu.space.dist[np.asarray(points, dtype=int)]
    out = np.empty((len(points), len(eps_grid)))
    for j, eps in enumerate(eps_grid):
        out[:, j] = (d < eps) @ mu.weights
    return out


def quantization_cost(mu, centers):
    """Average (mass-weighted) distance to the nearest center."""
    centers = np.asarray(centers, dtype=int)
    if centers.size == 0:
        raise DomainError("centers must be non-empty")
    if centers.min() < 0 or centers.max() >= mu.space.n:
        raise IndexError("center index out of range")
    return float(mu.weights @ mu.space.dist[:, centers].min(axis=1))


def _assignments(dist, centers):
    """Nearest/second-nearest center bookkeeping: (a, a2, d1, d2)."""
    m = dist.shape[0]
    dc = dist[:, centers]
    if len(centers) == 1:
        a = np.zeros(m, dtype=int)
        return a, np.zeros(m, dtype=int), dc[:, 0].copy(), np.full(m, np.inf)
    order = np.argpartition(dc, 1, axis=1)[:, :2]
    pick = dc[np.arange(m)[:, None], order]
    flip = pick[:, 0] > pick[:, 1]
    order[flip] = order[flip][:, ::-1]
    pick[flip] = pick[flip][:, ::-1]
    return order[:, 0], order[:, 1], pick[:, 0].copy(), pick[:, 1].copy()


def _swap_delta_matrix(dist, w, centers, a, d1, d2):
    """Cost change of every (entering x, leaving center) swap; (k, m) array.

    Decomposition per entering point x and leaving center c:
    delta = sum_i w_i min(0, d_ix - d1_i)  (points x captures from anyone)
          + sum_{i in c} w_i clip(min(d_ix, d2_i) - d1_i, 0)  (c's orphans).
    """
    k = len(centers)
    work = dist - d1[None, :]
    np.minimum(work, 0.0, out=work)
    g = work @ w
    # orphan cost matrix, columns regrouped by cluster for one reduceat pass
    order = np.argsort(a, kind="stable")
    np.take(dist, order, axis=1, out=work)
    np.minimum(work, d2[order][None, :], out=work)
    work -= d1[order][None, :]
    np.clip(work, 0.0, None, out=work)
    work *= w[order][None, :]
    counts = np.bincount(a, minlength=k)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    empty = counts == 0
    starts_safe = np.minimum(starts, work.shape[1] - 1)
    seg = np.add.reduceat(work, starts_safe, axis=1)  # (m, k)
    if empty.any():
        seg[:, empty] = 0.0
    delta = np.ascontiguousarray(seg.T)
    delta += g[None, :]
    delta[:, centers] = np.inf
    return delta


def _swap_local_search(dist, w, centers, max_rounds=None):
    """Swap descent for weighted k-median: replace one center by one
    non-center while the cost improves.

    Each round computes every swap delta, applies improving swaps in delta
    order (re-verified against the current configuration, ties to the
    lowest entering then leaving index), and maintains the assignment
    bookkeeping incrementally.  Rounds are capped by a work budget on large
    instances; the result is an upper bound either way.
    """
    m = dist.shape[0]
    centers = np.array(sorted(centers), dtype=int)
    k = len(centers)
    if k >= m:
        return np.arange(m), 0.0
    if max_rounds is None:
        max_rounds = int(np.clip(10**8 // max(m * m, 1), 4, 60))

    a, a2, d1, d2 = _assignments(dist, centers)
    cost = float(w @ d1)

    def apply_swap(ci, x):
        nonlocal a, a2, d1, d2
        centers[ci] = x
        col = dist[:, x]
        # rows whose nearest or second-nearest involved the replaced slot,
        # plus rows the entering column can now beat
        affected = (a == ci) | (a2 == ci) | (col < d2)
        idx = np.flatnonzero(affected)
        if idx.size:
            sub_a, sub_a2, sub_d1, sub_d2 = _assignments(dist[idx], centers)
            a[idx], a2[idx], d1[idx], d2[idx] = sub_a, sub_a2, sub_d1, sub_d2

    for _ in range(max_rounds):
        delta = _swap_delta_matrix(dist, w, centers, a, d1, d2)
        best_x = np.argmin(delta, axis=1)
        best_delta = delta[np.arange(k), best_x]
        improving = np.flatnonzero(best_delta < -1e-12)
        if improving.size == 0:
            break
        order = sorted(
            (float(best_delta[ci]), int(best_x[ci]), int(centers[ci]), int(ci))
            for ci in improving
        )
        applied = 0
        in_centers = set(int(c) for c in centers)
        for _, x, c, ci in order:
            if centers[ci] != c or x in in_centers:
                continue
            # re-verify against the current configuration
            fallback = np.where(a == ci, d2, d1)
            gain = float(w @ (np.minimum(fallback, dist[:, x]) - d1))
            if gain < -1e-12:
                in_centers.discard(c)
                in_centers.add(x)
                apply_swap(ci, x)
                applied += 1
        new_cost = float(w @ d1)
        # diminishing-returns stop: later rounds chase sub-relative crumbs
        if applied == 0 or new_cost > cost * (1 - 1e-3) - 1e-15:
            cost = new_cost
            break
        cost = new_cost
    return np.sort(centers), float(w @ d1)


def _medoid_alternation(dist, w, centers, max_iters=12):
    """Lloyd-style warm start: assign, then re-center each cluster."""
    m = dist.shape[0]
    centers = np.array(sorted(set(int(c) for c in centers)), dtype=int)
    for _ in range(max_iters):
        k = len(centers)
        a = np.argmin(dist[:, centers], axis=1)
        order = np.argsort(a, kind="stable")
        bounds = np.searchsorted(a[order], np.arange(k + 1))
        new = centers.copy()
        for ci in range(k):
            members = order[bounds[ci]:bounds[ci + 1]]
            if members.size == 0:
                continue
            sub = dist[np.ix_(members, members)]
            costs = w[members] @ sub
            new[ci] = int(members[np.argmin(costs)])
        uniq = np.unique(new)
        if len(uniq) < k:
            # collapsed clusters: re-seed the farthest points deterministically
            missing = k - len(uniq)
            pool = np.setdiff1d(np.arange(m), uniq)
            extra = pool[np.argsort(dist[:, uniq].min(axis=1)[pool])[::-1][:missing]]
            uniq = np.sort(np.concatenate([uniq, extra]))
        if np.array_equal(uniq, centers):
            break
        centers = uniq
    return centers


def best_n_median(mu, n, seed=0, restarts=20, threads=1):
    """Best set of n centers (within supp mu) for the average-distance cost.

    Exhaustive when C(|supp|, n) <= 1e6, else the best of `restarts` seeded
    runs of swap-based local search from weighted random starts (with a
    medoid-alternation warm start).  The cost is exact in the exhaustive
    regime and an upper bound otherwise; the result records the regime.
    """
    supp = mu.support
    m = len(supp)
    if not 1 <= n <= m:
        raise DomainError(f"n must be in [1, {m}], got {n}")
    dist = mu.space.dist[np.ix_(supp, supp)]
    w = mu.weights[supp]

    if n == m:
        return QuantizerResult(tuple(int(i) for i in supp), 0.0, n, True)

    n_subsets = comb(m, n)
    if n == 1:
        costs = w @ dist
        c = int(np.argmin(costs))
        return QuantizerResult((int(supp[c]),), float(costs[c]), n, True)
    if n_subsets <= EXACT_SUBSET_CAP:
        if n == 2:
            best = (math.inf, None)
            for c1 in range(m - 1):
                rest = np.minimum(dist[:, c1:c1 + 1], dist[:, c1 + 1:])
                costs = w @ rest
                c2 = int(np.argmin(costs))
                if costs[c2] < best[0]:
                    best = (float(costs[c2]), (c1, c1 + 1 + c2))
            cost, cs = best
        else:
            best = (math.inf, None)
            for sub in combinations(range(m), n):
                cost = float(w @ dist[:, sub].min(axis=1))
                if cost < best[0] - 1e-18:
                    best = (cost, sub)
            cost, cs = best
        centers = tuple(int(supp[c]) for c in cs)
        return QuantizerResult(centers, cost, n, True)

    best_cost = math.inf
    best_centers = None
    probs = w / w.sum()
    # full swap descent per restart only on small instances; above that the
    # restarts are warm starts and the single best one gets the descent
    swap_every_restart = m <= 1024

    def one_restart(r):
        rng = np.random.default_rng(np.random.SeedSequence((seed, r)))
        init = rng.choice(m, size=n, replace=False, p=probs)
        centers = _medoid_alternation(dist, w, init)
        if swap_every_restart:
            centers, cost = _swap_local_search(dist, w, centers)
        else:
            _, _, d1, _ = _assignments(dist, centers)
            cost = float(w @ d1)
        return cost, tuple(int(c) for c in centers)

    results = parallel_map(one_restart, range(restarts), threads=threads)
    for cost, centers in results:
        if cost < best_cost - 1e-15 or (abs(cost - best_cost) <= 1e-15
                                        and best_centers is not None
                                        and centers < best_centers):
            best_cost, best_centers = cost, centers
    if not swap_every_restart:
        centers, cost = _swap_local_search(dist, w, np.array(best_centers))
        if cost < best_cost:
            best_cost, best_centers = cost, tuple(int(c) for c in centers)
    centers = tuple(int(supp[c]) for c in best_centers)
    return QuantizerResult(centers, float(best_cost), n, False)


def quantization_number(mu, eps, seed=0, restarts=20, cache=None, threads=1,
                        rel_gap=None):
    """Minimal number of centers with average distance <= eps.

    Monotone bisection over n; cost is non-increasing in n in the exact
    regime, and in the heuristic regime the returned n is an upper bound
    (flagged in the result).  rel_gap, if set, stops the bisection once the
    bracket is multiplicatively tight (hi <= lo * (1 + rel_gap)) and returns
    hi; it only ever loosens the heuristic regime's upper bound and is
    ignored while the probes stay exhaustive.
    """
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    supp = mu.support
    m = len(supp)
    cache = cache if cache is not None else {}
    heuristic = False
    # relative slack so float dust cannot flip a mathematically exact tie
    eps = eps * (1 + 1e-12)

    def cost(n):
        nonlocal heuristic
        if n not in cache:
            cache[n] = best_n_median(mu, n, seed=seed, restarts=restarts,
                                     threads=threads)
        res = cache[n]
        heuristic |= not res.exhaustive
        return res.cost

    if cost(1) <= eps:
        return QuantizationNumber(1, heuristic)
    # gallop from below so the expensive solves stay near the answer,
    # then bisect inside the bracket
    lo = 1
    hi = 2
    while hi < m and cost(hi) > eps:
        lo = hi
        hi = min(2 * hi, m)
    while hi - lo > 1:
        if rel_gap is not None and heuristic and hi <= lo * (1 + rel_gap):
            break
        mid = (lo + hi) // 2
        if cost(mid) <= eps:
            hi = mid
        else:
            lo = mid
    return QuantizationNumber(hi, heuristic)


@dataclass(frozen=True)
class MassEscapeResult:
    escaped_mass: float
    bound: float
    ok: bool


def mass_escape_check(mu, quantizer, r):
    """Mass outside the union of r-balls around the centers vs cost / r."""
    if r <= 0:
        raise DomainError(f"r must be positive, got {r}")
    centers = np.asarray(quantizer.centers, dtype=int)
    inside = (mu.space.dist[:, centers] < r).any(axis=1)
    escaped = float(mu.weights[~inside].sum())
    bound = quantizer.cost / r
    return MassEscapeResult(escaped, bound, escaped <= bound + 1e-12)


def weighted_percentile(values, weights, pct):
    """Smallest value whose cumulative weight reaches pct percent."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    target = pct / 100.0 * cum[-1]
    idx = int(np.searchsorted(cum, target - 1e-15))
    return float(values[order[min(idx, len(values) - 1)]])


@dataclass(frozen=True)
class ReportConfig:
    """Grids and knobs for a full scale report.

    Separate grids because the estimators fail in different regimes: the
    per-point local trend needs consecutive radii a factor >= ~8 apart to
    ride out the Poisson noise of small empirical balls, while the
    quantization magnitude test wants depth.  local_eps_grid defaults to
    every third grid point.
    """

    eps_grid: tuple
    quant_eps_grid: tuple = None
    local_eps_grid: tuple = None
    tail_window: int = 8
    local_tail_window: int = 2
    percentiles: tuple = (5.0, 95.0)
    alpha_bracket: tuple = (0.01, 8.0)
    seed: int = 0
    restarts: int = 20
    threads: int = 1
    tolerance: float = 0.15
    quant_rel_gap: float = None

    def resolved_quant_grid(self):
        return tuple(self.quant_eps_grid) if self.quant_eps_grid else tuple(self.eps_grid)

    def resolved_local_grid(self):
        if self.local_eps_grid:
            return tuple(self.local_eps_grid)
        return tuple(self.eps_grid[::3])


@dataclass(frozen=True)
class ScaleReport:
    """All ten scale quantities plus the graded inequality table."""

    quantities: dict
    arrows: list
    flags: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "quantities": {k: v.to_dict() for k, v in self.quantities.items()},
            "arrows": self.arrows,
            "flags": self.flags,
        }


def _per_point_local_estimates(mu, family, config):
    """Threshold estimates of the lower/upper local scale at each support point."""
    supp = mu.support
    grid = np.asarray(config.resolved_local_grid(), dtype=float)
    masses = _local_mass_matrix(mu, supp, grid)
    degenerate = masses[:, -1] <= 0
    log_masses = np.log(np.where(masses > 0, masses, 1.0))
    log_f = -log_masses
    constant = np.all(np.abs(log_f - log_f[:, :1]) < 1e-12, axis=1)

    lower = np.zeros(len(supp))
    upper = np.zeros(len(supp))
    varying = ~constant
    if varying.any():
        vals_lo, _, _ = threshold_alpha_batch(
            grid, log_f[varying], family, "lower", config.alpha_bracket,
            config.local_tail_window, on_unbracketed="clamp",
        )
        vals_hi, _, _ = threshold_alpha_batch(
            grid, log_f[varying], family, "upper", config.alpha_bracket,
            config.local_tail_window, on_unbracketed="clamp",
        )
        lower[varying] = vals_lo
        upper[varying] = vals_hi
    return lower, upper, degenerate


def local_scale(mu, x, family, eps_grid, tail_window=2, alpha_bracket=(0.01, 8.0)):
    """Lower/upper local scale estimate at one point.

    Applies the threshold machinery to f(eps) = 1 / mu(B(x, eps)); a
    constant mass profile (a Dirac atom, or radii below the resolution)
    yields the zero estimate by convention.  A zero mass at the smallest
    radius marks the estimate degenerate and pins it at the bracket top.
    """
    if not 0 <= x < mu.space.n:
        raise IndexError(f"point index {x} out of range")
    grid = np.asarray(eps_grid, dtype=float)
    masses = _local_mass_matrix(mu, [x], grid)[0]
    if masses[-1] <= 0:
        hi = alpha_bracket[1]
        return ScaleEstimate(hi, hi, {"flags": ["degenerate-mass"], "resolution": 0.0})
    est = scale_estimate_from_counts(grid, -np.log(masses), family,
                                     tail_window=tail_window,
                                     alpha_bracket=alpha_bracket)
    return est


def measure_scale_report(mu, family, config):
    """Estimate all ten scale quantities of a measure and grade the arrows.

    Hausdorff / packing style quantities are the stated weighted percentiles
    of the per-point lower/upper local estimates; box quantities come from
    covering counts of the support; quantization quantities from the
    quantization number over the grid.
    """
    supp = mu.support
    sub = mu.space.subspace(supp) if len(supp) < mu.space.n else mu.space
    w = mu.weights[supp]
    p_lo, p_hi = config.percentiles

    lower_pts, upper_pts, degenerate = _per_point_local_estimates(mu, family, config)
    flags = {}
    if degenerate.any():
        flags["degenerate-mass-points"] = int(degenerate.sum())

    def pct_estimate(values, pct, source):
        v = weighted_percentile(values, w, pct)
        return ScaleEstimate(v, v, {"flags": [], "percentile": pct, "source": source})

    quantities = {
        "hausdorff": pct_estimate(lower_pts, p_lo, "lower-local"),
        "hausdorff_star": pct_estimate(lower_pts, p_hi, "lower-local"),
        "packing": pct_estimate(upper_pts, p_lo, "upper-local"),
        "packing_star": pct_estimate(upper_pts, p_hi, "upper-local"),
        "local_lower": pct_estimate(lower_pts, 50.0, "lower-local"),
        "local_upper": pct_estimate(upper_pts, 50.0, "upper-local"),
    }

    box_grid = np.asarray(config.eps_grid, dtype=float)

    def covering_count(eps):
        if sub.n <= EXACT_COUNT_CAP:
            return covering_number_exact(sub, eps)
        return covering_number_greedy(sub, eps)

    box_counts = np.array(parallel_map(covering_count, box_grid, config.threads), dtype=float)
    box_est = scale_estimate_from_counts(box_grid, np.log(box_counts), family,
                                         tail_window=config.tail_window,
                                         alpha_bracket=config.alpha_bracket)
    quantities["box_lower"] = ScaleEstimate(box_est.lower, box_est.lower, box_est.diagnostics)
    quantities["box_upper"] = ScaleEstimate(box_est.upper, box_est.upper, box_est.diagnostics)

    quant_grid = np.asarray(config.resolved_quant_grid(), dtype=float)
    cache = {}
    q_counts = []
    q_heuristic = False
    for eps in quant_grid:
        qn = quantization_number(mu, eps, seed=config.seed, restarts=config.restarts,
                                 cache=cache, threads=config.threads,
                                 rel_gap=config.quant_rel_gap)
        q_counts.append(qn.n)
        q_heuristic |= qn.heuristic
    q_counts = np.array(q_counts, dtype=float)
    q_est = scale_estimate_from_counts(quant_grid, np.log(q_counts), family,
                                       tail_window=min(config.tail_window, len(quant_grid)),
                                       alpha_bracket=config.alpha_bracket)
    q_flags = list(q_est.diagnostics.get("flags", []))
    if q_heuristic:
        q_flags.append("heuristic-upper-bound")
    q_diag = dict(q_est.diagnostics, flags=q_flags)
    quantities["quant_lower"] = ScaleEstimate(q_est.lower, q_est.lower, q_diag)
    quantities["quant_upper"] = ScaleEstimate(q_est.upper, q_est.upper, q_diag)

    from .estimators import grade_quantities

    arrows = grade_quantities(quantities, config.tolerance)
    return ScaleReport(quantities=quantities, arrows=arrows, flags=flags)
