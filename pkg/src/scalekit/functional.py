"""Hoelder function classes: net counting and the label-sequence embedding.

Two independent routes to the entropy growth of the Lipschitz class on
[0, 1]: an exact dynamic-programming count of a lattice net (upper route),
and an embedding of label sequences into smooth bump sums whose separation
properties witness the same growth from below.

The embedding places one bump per lattice cell: level n splits [0, 1) into
R^n half-open cells, and the bump profile is evaluated at the scaled offset
from the cell's left edge, so supports are genuinely disjoint and the
level-n sup distance between two label vectors is exactly eps_n times the
largest label difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, GridError, ResourceError, SizeError
from .scaling import ORDER, ScaleEstimate, ratio_estimate

EMBED_BUDGET = 10**7  # total bump evaluations allowed per embedding
NET_COUNT_CAP = 2**16  # largest 1/eps for the DP
REFERENCE_GRID_STEP = 2.0**-14  # resolution for the cached bump seminorm


@dataclass(frozen=True)
class FunctionClassSpec:
    """Smoothness class on [0,1]^d: k derivatives, Hoelder exponent alpha."""

    d: int
    k: int
    alpha: float

    def __post_init__(self):
        if self.d < 1:
            raise DomainError("domain dimension must be positive")
        if self.k < 0:
            raise DomainError("smoothness k must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError("alpha must lie in [0, 1]")

    @property
    def q(self):
        return self.k + self.alpha

    @property
    def bump_grid_base(self):
        """Cells per unit per level: floor(5^(1/q)) + 1."""
        if self.q <= 0:
            raise DomainError("embedding needs k + alpha > 0")
        return int(5.0 ** (1.0 / self.q)) + 1


@dataclass(frozen=True)
class GridFunction:
    """Samples of a function on the uniform grid of [0, 1]."""

    grid_step: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        n = round(1.0 / self.grid_step)
        if abs(n * self.grid_step - 1.0) > 1e-9:
            raise DomainError("grid_step must divide 1")
        if len(values) != n + 1:
            raise DomainError(f"expected {n + 1} samples, got {len(values)}")
        if np.any(np.abs(values) > 1.0 + 1e-9):
            raise DomainError("values must lie in [-1, 1]")
        object.__setattr__(self, "values", values)

    @property
    def grid(self):
        return np.arange(len(self.values)) * self.grid_step

    def to_csv(self):
        lines = ["t,f"]
        for t, v in zip(self.grid, self.values):
            lines.append(f"{t!r},{v!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LabelSequence:
    """Per-level label vectors in {-1, 0, +1}, level n of length R^n."""

    levels: tuple
    R: int

    def __post_init__(self):
        for n, lab in enumerate(self.levels, start=1):
            lab = np.asarray(lab)
            if lab.shape != (self.R**n,):
                raise DomainError(f"level {n} must have length {self.R**n}")
            if not np.all(np.isin(lab, (-1, 0, 1))):
                raise DomainError("labels must lie in {-1, 0, +1}")

    @property
    def depth(self):
        return len(self.levels)


def random_labels(spec, depth, rng):
    levels = tuple(rng.integers(-1, 2, size=spec.bump_grid_base**n)
                   for n in range(1, depth + 1))
    return LabelSequence(levels, spec.bump_grid_base)


def bump(q, t):
    """The profile (2t)^q (2-2t)^q on (0, 1), zero elsewhere; peak 1 at 1/2."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tt = np.where(inside, t, 0.5)
    vals = np.where(inside, (2 * tt) ** q * (2 - 2 * tt) ** q, 0.0)
    if vals.ndim == 0:
        return float(vals)
    return vals


def holder_seminorm(f, k, alpha):
    """Smallest Hoelder constant of the k-th finite difference on the grid.

    Uses k-th forward differences; the grid maximum converges to the true
    seminorm from below as the grid refines (for C^(k+1) functions).
    """
    values = np.asarray(f.values, dtype=float)
    h = f.grid_step
    if len(values) < k + 2:
        raise GridError(f"need at least {k + 2} nodes for k={k} differences")
    diffs = np.diff(values, n=k) / h**k
    if alpha == 1.0:
        # telescoping makes the all-pairs maximum equal the adjacent maximum
        return float(np.max(np.abs(np.diff(diffs))) / h) if len(diffs) > 1 else 0.0
    best = 0.0
    n = len(diffs)
    for lag in range(1, n):
        gap = (lag * h) ** alpha
        best = max(best, float(np.max(np.abs(diffs[lag:] - diffs[:-lag]))) / gap)
    return best


@lru_cache(maxsize=None)
def bump_seminorm(q):
    """Hoelder-q seminorm of the bump profile at the reference resolution.

    For q = 1 the exact value is 4 (the slope at the endpoints), which
    doubles as a regression anchor for the finite-difference estimate.
    """
    k = int(math.ceil(q)) - 1
    alpha = q - k
    if alpha == 0.0:
        k, alpha = k - 1, 1.0
    n = round(1.0 / REFERENCE_GRID_STEP)
    t = np.arange(n + 1) * REFERENCE_GRID_STEP
    f = GridFunction(REFERENCE_GRID_STEP, bump(q, t))
    return holder_seminorm(f, k, alpha)


def level_amplitude(spec, n):
    """Sup norm of a single level-n bump: 6 / (pi^2 n^2 R^(qn) |phi|_q)."""
    R = spec.bump_grid_base
    return 6.0 / (math.pi**2 * n**2 * R ** (spec.q * n) * bump_seminorm(spec.q))


def embed(labels, spec, grid_step):
    """Sum of per-level bump combinations sampled on the grid.

    Level n places one bump on each of the R^n cells, scaled by the level
    amplitude and signed by the labels.  Restricted to d = 1.
    """
    if spec.d != 1:
        raise DomainError("embedding is implemented for d = 1 only")
    if labels.R != spec.bump_grid_base:
        raise DomainError("label sequence was built for a different class")
    R = spec.bump_grid_base
    depth = labels.depth
    cost = sum(R**n for n in range(1, depth + 1)) + depth * round(1.0 / grid_step)
    if cost > EMBED_BUDGET:
        raise ResourceError(f"embedding budget exceeded ({cost} > {EMBED_BUDGET})")
    n_nodes = round(1.0 / grid_step) + 1
    x = np.arange(n_nodes) * grid_step
    out = np.zeros(n_nodes)
    for n in range(1, depth + 1):
        scaled = x * R**n
        cell = np.minimum(scaled.astype(int), R**n - 1)
        frac = scaled - cell
        out += level_amplitude(spec, n) * np.asarray(labels.levels[n - 1])[cell] * bump(spec.q, frac)
    return GridFunction(grid_step, out)


@dataclass(frozen=True)
class SeparationCheck:
    lhs: float
    rhs: float
    ok: bool
    first_diff_level: int


def verify_separation(labels_a, labels_b, spec, grid_step):
    """Check the embedded sup distance dominates half the sequence distance.

    The sequence distance is the level amplitude at the first differing
    level; the grid error allowance is 2 * grid_step (class Lipschitz
    bound 1).
    """
    if labels_a.depth != labels_b.depth or labels_a.R != labels_b.R:
        raise DomainError("label sequences must share depth and base")
    f_a = embed(labels_a, spec, grid_step)
    f_b = embed(labels_b, spec, grid_step)
    lhs = float(np.max(np.abs(f_a.values - f_b.values)))
    first = 0
    for n in range(labels_a.depth):
        if not np.array_equal(labels_a.levels[n], labels_b.levels[n]):
            first = n + 1
            break
    rhs = 0.0 if first == 0 else 0.5 * level_amplitude(spec, first)
    return SeparationCheck(lhs, rhs, lhs >= rhs - 2 * grid_step, first)


def lipschitz_net_count(eps):
    """Exact count (in log form) of the lattice net for the Lipschitz class.

    Counts piecewise-linear functions on the step-eps grid with node values
    in eps * Z intersected with [-1, 1] and node increments in
    {-eps, 0, +eps}.  The set is eps-separated in sup norm (lower-bounding
    the eps-packing number) and a 2 eps-net of the class (upper-bounding
    the 2 eps-covering number); only the growth exponent is used downstream.
    """
    M = round(1.0 / eps)
    if abs(M * eps - 1.0) > 1e-12 or M < 1:
        raise DomainError(f"eps must be the reciprocal of an integer, got {eps}")
    if M > NET_COUNT_CAP:
        raise SizeError(f"net counting capped at 1/eps = {NET_COUNT_CAP}")
    n_states = 2 * M + 1
    log_c = np.zeros(n_states)
    pad = np.full(1, -np.inf)
    for _ in range(M):
        up = np.concatenate([log_c[1:], pad])
        down = np.concatenate([pad, log_c[:-1]])
        log_c = np.logaddexp(np.logaddexp(up, down), log_c)
    total = float(np.logaddexp.reduce(log_c))
    return total, "exact"


def brute_force_net_count(eps):
    """Independent enumeration of the same lattice set (tiny eps only)."""
    M = round(1.0 / eps)
    if M > 8:
        raise SizeError("enumeration oracle only runs for 1/eps <= 8")
    count = 0
    stack = [(v, 0) for v in range(-M, M + 1)]
    while stack:
        v, step = stack.pop()
        if step == M:
            count += 1
            continue
        for dv in (-1, 0, 1):
            if -M <= v + dv <= M:
                stack.append((v + dv, step + 1))
    return count


def lipschitz_order_estimate(eps_list, tail_window=4):
    """Feed the net counts through the double-exponential ratio estimator."""
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    logs = [lipschitz_net_count(e)[0] for e in eps_list]
    return ratio_estimate(eps_grid=eps_list, log_counts=logs, p=ORDER.p, q=ORDER.q,
                          tail_window=tail_window)
