"""Finite metric spaces: covering and packing numbers, finite premeasures.

Conventions, fixed once for the whole package: balls are OPEN (d < r) and a
packing is a set with pairwise separation d >= eps.  With these choices the
sandwich  pack(2 eps) <= cover(eps) <= pack(eps)  holds literally on
discrete spaces, including at radii that coincide with realized distances.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DomainError, SizeError
from .scaling import log_eval_scaling

EXACT_COUNT_CAP = 24      # branch-and-bound cap for covering/packing numbers
EXACT_HAUSDORFF_CAP = 14  # exact premeasure cover search cap
EXACT_PACKING_BUDGET = 60  # |X| * |menu| cap for exact packing premeasure
TRIANGLE_CHECK_CAP = 512  # above this the O(n^3) validation is skipped


@dataclass(frozen=True)
class FiniteMetricSpace:
    """Labelled points with a symmetric distance matrix."""

    labels: tuple
    dist: np.ndarray

    def __post_init__(self):
        d = self.dist
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DomainError("distance matrix must be square")
        if len(self.labels) != d.shape[0]:
            raise DomainError("labels must match the matrix size")
        if d.shape[0] == 0:
            raise DomainError("space must be non-empty")
        if np.any(d < 0):
            raise DomainError("distances must be non-negative")
        if np.any(np.abs(np.diagonal(d)) > 0):
            raise DomainError("diagonal must be zero")
        if not np.allclose(d, d.T, atol=1e-12):
            raise DomainError("distance matrix must be symmetric")

    @classmethod
    def create(cls, labels, dist, check_triangle=None):
        """Validating constructor; the O(n^3) triangle check is skippable.

        check_triangle=None checks spaces up to 512 points and skips larger
        ones; pass True/False to force either way.
        """
        dist = np.asarray(dist, dtype=float)
        labels = tuple(str(x) for x in labels)
        space = cls(labels, dist)
        n = dist.shape[0]
        if check_triangle is None:
            check_triangle = n <= TRIANGLE_CHECK_CAP
        if check_triangle:
            for k in range(n):
                slack = dist - (dist[:, k:k + 1] + dist[k:k + 1, :])
                if np.any(slack > 1e-9):
                    i, j = np.unravel_index(np.argmax(slack), slack.shape)
                    raise DomainError(
                        f"triangle inequality fails at ({i}, {k}, {j}): "
                        f"{dist[i, j]} > {dist[i, k]} + {dist[k, j]}"
                    )
        return space

    @classmethod
    def from_points(cls, points, metric="euclidean", labels=None):
        """Build from a point cloud under the Euclidean or sup metric."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if metric == "euclidean":
            d = cdist(points, points, "euclidean")
        elif metric == "sup":
            d = cdist(points, points, "chebyshev")
        else:
            raise DomainError(f"unknown metric {metric!r}")
        d = 0.5 * (d + d.T)
        np.fill_diagonal(d, 0.0)
        if labels is None:
            labels = [str(i) for i in range(len(points))]
        # point-cloud metrics satisfy the triangle inequality by construction
        return cls(tuple(str(x) for x in labels), d)

    @property
    def n(self):
        return self.dist.shape[0]

    @property
    def diameter(self):
        return float(self.dist.max())

    def ball(self, center, radius):
        """Indices of the open ball around a point."""
        return np.flatnonzero(self.dist[center] < radius)

    def subspace(self, indices):
        indices = np.asarray(indices, dtype=int)
        labels = tuple(self.labels[i] for i in indices)
        return FiniteMetricSpace(labels, self.dist[np.ix_(indices, indices)])


@dataclass(frozen=True)
class BallCover:
    """A list of centers (point indices) with one or per-center radii."""

    centers: tuple
    radii: tuple

    def covers(self, space):
        covered = np.zeros(space.n, dtype=bool)
        for c, r in zip(self.centers, self.radii):
            covered[space.dist[c] < r] = True
        return bool(covered.all())

    @property
    def size(self):
        return len(self.centers)


@dataclass(frozen=True)
class Packing:
    """Center/radius pairs with pairwise separation d >= r_i + r_j."""

    centers: tuple
    radii: tuple

    def is_valid(self, space):
        for (c1, r1), (c2, r2) in combinations(zip(self.centers, self.radii), 2):
            if space.dist[c1, c2] < r1 + r2:
                return False
        return True


def covering_number_exact(space, eps):
    """Minimal number of open eps-balls centered in the space covering it.

    Branch and bound over center subsets, greedy upper bound for pruning;
    capped at 24 points.
    """
    n = space.n
    if n > EXACT_COUNT_CAP:
        raise SizeError(f"exact covering search capped at {EXACT_COUNT_CAP} points, got {n}")
    within = space.dist < eps
    balls = [int(sum(1 << j for j in np.flatnonzero(row))) for row in within]
    full = (1 << n) - 1
    # dominated balls (subsets of another ball) never help a minimal cover
    keep = []
    for i, b in enumerate(balls):
        if not any(j != i and balls[j] | b == balls[j] and balls[j] != b for j in range(n)):
            keep.append(b)
    ball_sizes = [bin(b).count("1") for b in keep]
    max_size = max(ball_sizes)

    best = covering_number_greedy(space, eps)

    def rec(covered, used):
        nonlocal best
        if covered == full:
            best = min(best, used)
            return
        remaining = full & ~covered
        lower = used + -(-bin(remaining).count("1") // max_size)
        if lower >= best:
            return
        pivot = (remaining & -remaining).bit_length() - 1
        cands = sorted(
            (b for b in keep if b >> pivot & 1),
            key=lambda b: -bin(b & remaining).count("1"),
        )
        for b in cands:
            rec(covered | b, used + 1)

    rec(0, 0)
    return best


def greedy_cover(space, eps):
    """Greedy set cover by open eps-balls; ties broken by lowest center index."""
    n = space.n
    within = space.dist < eps
    uncovered = np.ones(n, dtype=bool)
    counts = within.sum(axis=1).astype(np.int64)
    centers = []
    while uncovered.any():
        c = int(np.argmax(counts))
        newly = within[c] & uncovered
        counts -= within[:, newly].sum(axis=1)
        uncovered &= ~within[c]
        centers.append(c)
    return BallCover(tuple(centers), tuple([float(eps)] * len(centers)))


def covering_number_greedy(space, eps):
    """Size of the greedy cover; >= exact and <= exact * (1 + ln n)."""
    return greedy_cover(space, eps).size


def packing_number_exact(space, eps):
    """Maximum cardinality of a subset with pairwise distances >= eps.

    Maximum clique in the graph with edges d(x, y) >= eps, by branch and
    bound; capped at 24 points.
    """
    n = space.n
    if n > EXACT_COUNT_CAP:
        raise SizeError(f"exact packing search capped at {EXACT_COUNT_CAP} points, got {n}")
    idx = np.arange(n)
    adj = [int(sum(1 << j for j in np.flatnonzero((space.dist[i] >= eps) & (idx != i))))
           for i in range(n)]
    best = packing_number_greedy(space, eps)

    def rec(cand, size):
        nonlocal best
        if size + bin(cand).count("1") <= best:
            return
        if cand == 0:
            best = max(best, size)
            return
        while cand:
            if size + bin(cand).count("1") <= best:
                return
            v = (cand & -cand).bit_length() - 1
            cand &= cand - 1
            rec(adj[v] & cand, size + 1)

    rec((1 << n) - 1, 0)
    return best


def greedy_packing(space, eps):
    """Scan points in index order, keeping those eps-far from all kept ones.

    The result is a maximal eps-separated set, hence also an eps-net: every
    point lies within < eps of some kept point.
    """
    n = space.n
    ok = np.ones(n, dtype=bool)
    kept = []
    for i in range(n):
        if ok[i]:
            kept.append(i)
            ok &= space.dist[i] >= eps
    return kept


def packing_number_greedy(space, eps):
    """Size of the greedy maximal eps-separated set (lower bounds exact)."""
    return len(greedy_packing(space, eps))


def gauge_value(family, alpha, radius):
    """Gauge weight of a ball radius for premeasures.

    Radii below 1 use the family's gauge directly.  For q = 1 the gauge
    extends to radii >= 1 with the plain logarithm (power family -> r^alpha,
    double-exp family -> exp(-r^-alpha)); deeper log compositions have no
    such extension and reject radii >= 1.
    """
    if radius <= 0:
        raise DomainError(f"radius must be positive, got {radius}")
    if radius < 1.0:
        return math.exp(log_eval_scaling(family, alpha, radius))
    if family.q != 1:
        raise DomainError(f"gauge with q={family.q} is undefined at radius {radius} >= 1")
    t = alpha * math.log(1.0 / radius)
    for _ in range(family.p - 1):
        t = math.exp(t)
    return math.exp(-t)


def _premeasure_items(space, family, alpha, radius_menu):
    menu = sorted(float(r) for r in radius_menu)
    if not menu:
        raise DomainError("radius menu must be non-empty")
    if menu[0] <= 0:
        raise DomainError("radius menu must be positive")
    items = []
    for c in range(space.n):
        for ri, r in enumerate(menu):
            items.append((c, ri, r, gauge_value(family, alpha, r)))
    return menu, items


def hausdorff_premeasure(space, family, alpha, radius_menu):
    """Cheapest cover cost: min over covers of the summed gauge weights.

    Centers are points of the space, radii come from the menu (the menu's
    maximum plays the role of the resolution cap).  Exact search up to 14
    points, greedy best-marginal-ratio above.
    """
    menu, items = _premeasure_items(space, family, alpha, radius_menu)
    n = space.n
    masks = []
    for c, ri, r, w in items:
        mask = int(sum(1 << j for j in space.ball(c, r)))
        masks.append((mask, w, c, ri))
    full = (1 << n) - 1

    def greedy_cost():
        covered = 0
        cost = 0.0
        while covered != full:
            best_item = None
            best_ratio = -1.0
            for mask, w, c, ri in masks:
                new = bin(mask & ~covered).count("1")
                if new == 0:
                    continue
                ratio = new / w
                if ratio > best_ratio + 1e-15:
                    best_ratio, best_item = ratio, (mask, w)
            covered |= best_item[0]
            cost += best_item[1]
        return cost

    if n > EXACT_HAUSDORFF_CAP:
        return greedy_cost()

    best = greedy_cost()
    min_ratio = min(w / bin(mask).count("1") for mask, w, _, _ in masks if mask)

    def rec(covered, cost):
        nonlocal best
        remaining = full & ~covered
        if remaining == 0:
            best = min(best, cost)
            return
        if cost + bin(remaining).count("1") * min_ratio >= best - 1e-15:
            return
        pivot = (remaining & -remaining).bit_length() - 1
        cands = sorted(
            ((mask, w) for mask, w, _, _ in masks if mask >> pivot & 1),
            key=lambda mw: mw[1] / bin(mw[0]).count("1"),
        )
        for mask, w in cands:
            rec(covered | mask, cost + w)

    rec(0, 0.0)
    return best


def packing_premeasure(space, family, alpha, radius_menu):
    """Richest packing: max over center/radius packings of summed weights.

    Disjointness is encoded as center separation d(c_i, c_j) >= r_i + r_j,
    which forces ball disjointness in any metric space.  Exact when
    |X| * |menu| <= 60 assignments, else greedy largest-weight-first.
    """
    menu, items = _premeasure_items(space, family, alpha, radius_menu)
    order = sorted(items, key=lambda it: (-it[3], it[0], it[1]))

    def compatible(a, b):
        return space.dist[a[0], b[0]] >= a[2] + b[2]

    if len(items) > EXACT_PACKING_BUDGET:
        chosen = []
        total = 0.0
        for it in order:
            if all(compatible(it, other) for other in chosen):
                chosen.append(it)
                total += it[3]
        return total

    weights = [it[3] for it in order]
    suffix = np.concatenate([np.cumsum(weights[::-1])[::-1], [0.0]])
    best = 0.0

    def rec(idx, chosen, total):
        nonlocal best
        best = max(best, total)
        if idx == len(order) or total + suffix[idx] <= best + 1e-15:
            return
        it = order[idx]
        if all(compatible(it, other) for other in chosen):
            chosen.append(it)
            rec(idx + 1, chosen, total + it[3])
            chosen.pop()
        rec(idx + 1, chosen, total)

    rec(0, [], 0.0)
    return best


def default_radius_menu(space, eps):
    """Sorted pairwise distances clipped to (0, eps]; the radii that matter."""
    vals = np.unique(space.dist)
    vals = vals[(vals > 0) & (vals <= eps)]
    if len(vals) == 0:
        vals = np.array([eps])
    return [float(v) for v in vals]


def load_distance_csv(path):
    """Square distance-matrix CSV with a header row of labels."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DomainError(f"{path} is empty")
    labels = [x.strip() for x in rows[0]]
    data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    if data.shape != (len(labels), len(labels)):
        raise DomainError(
            f"{path}: expected a {len(labels)}x{len(labels)} matrix, got {data.shape}"
        )
    return FiniteMetricSpace.create(labels, data)


def load_points_csv(path, metric="euclidean"):
    """Point-cloud CSV, one row per point; optional non-numeric header row.

    Returns (space, weights) where weights come from a 'weight' column when
    the header names one and default to uniform otherwise.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise DomainError(f"{path} is empty")
    header = None
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        header = [c.strip().lower() for c in rows[0]]
        rows = rows[1:]
    data = np.array([[float(v) for v in row] for row in rows], dtype=float)
    weights = np.ones(len(data))
    if header and "weight" in header:
        wcol = header.index("weight")
        weights = data[:, wcol].copy()
        data = np.delete(data, wcol, axis=1)
    space = FiniteMetricSpace.from_points(data, metric=metric)
    return space, weights
