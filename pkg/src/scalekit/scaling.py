"""Scaling families and the threshold machinery shared by every scale.

A scaling family is indexed by two small integers (p, q) and maps a gauge
parameter alpha > 0 and a radius eps in (0, 1) to

    1 / exp^(p)(alpha * logplus^(q)(1/eps)),

where exp^(p) is exp composed p times and logplus is the positive part of
the logarithm.  (1, 1) gives the power-law gauges eps^alpha of dimension
theory; (2, 1) gives exp(-eps^-alpha), the gauge with finite values on
infinite-dimensional spaces; (2, 2) fits bounded holomorphic classes.

Everything is carried in log space: values as small as exp(-1e6) are exact
in their reported log form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketError, DomainError

_EXP_OVERFLOW = 709.0  # log of the largest double


@dataclass(frozen=True)
class ScalingFamily:
    """A (p, q)-indexed gauge family; p exp compositions, q log compositions."""

    p: int
    q: int

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise DomainError(f"scaling family needs p, q >= 1, got ({self.p}, {self.q})")


#: Power-law gauges eps^alpha (classical dimension).
DIMENSION = ScalingFamily(1, 1)
#: Gauges exp(-eps^-alpha) (finite on Hoelder balls and Wiener supports).
ORDER = ScalingFamily(2, 1)


def _iterated_log_plus(x, q):
    for _ in range(q):
        x = math.log(x) if x > 1.0 else 0.0
    return x


def log_eval_scaling(family, alpha, eps):
    """log of the gauge value; -exp^(p-1)(alpha * logplus^(q)(1/eps))."""
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must be in (0, 1), got {eps}")
    if alpha <= 0.0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    t = alpha * _iterated_log_plus(1.0 / eps, family.q)
    for _ in range(family.p - 1):
        if t > _EXP_OVERFLOW:
            return -math.inf
        t = math.exp(t)
    return -t


def eval_scaling(family, alpha, eps):
    """Gauge value in (0, 1]; may underflow to 0.0, use log_eval_scaling then."""
    return math.exp(log_eval_scaling(family, alpha, eps))


def _log_scaling_grid(family, alpha, eps_grid):
    """Vector of log gauge values over a grid (alpha may be a column vector)."""
    eps_grid = np.asarray(eps_grid, dtype=float)
    inv = 1.0 / eps_grid
    ell = inv.copy()
    for _ in range(family.q):
        ell = np.where(ell > 1.0, np.log(np.maximum(ell, 1.0)), 0.0)
    t = np.asarray(alpha) * ell
    with np.errstate(over="ignore"):
        for _ in range(family.p - 1):
            t = np.exp(t)
    return -t


@dataclass(frozen=True)
class RatioSequence:
    """Diagnostic sequence (eps, value) pairs with the tail used for extraction."""

    pairs: tuple
    tail_window: int

    def __post_init__(self):
        eps = [e for e, _ in self.pairs]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise DomainError("eps entries must be strictly decreasing")
        n = len(self.pairs)
        low = 1 if n == 1 else 2
        if not low <= self.tail_window <= n:
            raise DomainError(f"tail_window must be in [{low}, {n}], got {self.tail_window}")


@dataclass(frozen=True)
class ScaleEstimate:
    """A (lower, upper) scale estimate plus the evidence it was read from.

    diagnostics carries the ratio/trend sequence, the tail window, bisection
    resolution and flags such as 'heuristic-upper-bound', 'inconclusive-trend',
    'constant-counts' or 'degenerate-mass'.
    """

    lower: float
    upper: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        res = self.diagnostics.get("resolution", 0.0) if self.diagnostics else 0.0
        if self.lower > self.upper + max(res, 1e-12):
            raise DomainError(f"lower {self.lower} exceeds upper {self.upper}")

    @property
    def flags(self):
        return tuple(self.diagnostics.get("flags", ()))

    def to_dict(self):
        return {"lower": self.lower, "upper": self.upper, "diagnostics": self.diagnostics}


@dataclass(frozen=True)
class ScalingConditionReport:
    """Numeric evidence for the defining smallness conditions of a scaling."""

    ok: bool
    power_ratio_ok: bool
    exponent_ratio_ok: bool
    log_power_ratio: tuple
    log_exponent_ratio: tuple
    threshold: float


def check_scaling_condition(family, alpha, beta, lam, eps_grid, threshold=1e-3, tail_window=8):
    """Check both defining ratios vanish along a grid.

    Ratio one is scl_alpha(eps) / scl_beta(eps^lam); ratio two is
    scl_alpha(eps) / scl_beta(eps)^lam.  Both are evaluated in log space and
    must be strictly decreasing over the tail window with final value below
    the threshold.
    """
    if not alpha > beta > 0:
        raise DomainError(f"need alpha > beta > 0, got {alpha}, {beta}")
    if lam <= 1.0:
        raise DomainError(f"need lambda > 1, got {lam}")
    eps_grid = np.asarray(eps_grid, dtype=float)
    if np.any(np.diff(eps_grid) >= 0) or np.any(eps_grid <= 0) or np.any(eps_grid >= 1):
        raise DomainError("eps_grid must be strictly decreasing within (0, 1)")
    tail_window = min(tail_window, len(eps_grid))

    log_a = _log_scaling_grid(family, alpha, eps_grid)
    log_b_pow = _log_scaling_grid(family, beta, eps_grid**lam)
    log_b = _log_scaling_grid(family, beta, eps_grid)
    ratio1 = log_a - log_b_pow
    ratio2 = log_a - lam * log_b

    log_thr = math.log(threshold)

    def _ok(seq):
        tail = seq[-tail_window:]
        finite = np.isfinite(tail)
        # -inf tails mean the ratio underflowed to zero, i.e. it vanished.
        if not finite.all():
            return bool(tail[-1] == -math.inf)
        return bool(np.all(np.diff(tail) < 0) and tail[-1] < log_thr)

    ok1, ok2 = _ok(ratio1), _ok(ratio2)
    return ScalingConditionReport(
        ok=ok1 and ok2,
        power_ratio_ok=ok1,
        exponent_ratio_ok=ok2,
        log_power_ratio=tuple(ratio1.tolist()),
        log_exponent_ratio=tuple(ratio2.tolist()),
        threshold=threshold,
    )


def _classify_tails(seq_rows, tail_window):
    """Classify each row: +1 diverging, -1 vanishing, 0 inconclusive.

    Diverging means the last tail_window log values strictly increase and the
    final one is positive (value above 1); vanishing is the mirror image.
    """
    tail = seq_rows[:, -tail_window:]
    diffs = np.diff(tail, axis=1)
    with np.errstate(invalid="ignore"):
        div = np.all(diffs > 0, axis=1) & (tail[:, -1] > 0)
        van = np.all(diffs < 0, axis=1) & (tail[:, -1] < 0)
    # A tail that underflowed to -inf has vanished even if ties appear.
    van |= np.isneginf(tail[:, -1])
    out = np.zeros(len(seq_rows), dtype=int)
    out[div] = 1
    out[van & ~div] = -1
    return out


def threshold_alpha_batch(eps_grid, log_counts_rows, family, mode, alpha_bracket=None,
                          tail_window=8, iterations=40, on_unbracketed="error"):
    """Vectorized threshold-alpha over many count rows sharing one grid.

    Returns (values, flags_list, resolution).  See threshold_alpha.

    on_unbracketed='clamp' replaces the bracket error with the conservative
    value: 0 for lower mode when no alpha diverges (a flat or saturated count
    tail, the finite-data answer), the widened bracket top for upper mode
    when nothing vanishes (growth above the whole family, reported, not
    asserted); such rows are flagged.
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    rows = np.atleast_2d(np.asarray(log_counts_rows, dtype=float))
    if rows.shape[1] != len(eps_grid):
        raise DomainError("log_counts rows must match the eps grid length")
    if np.any(np.diff(eps_grid) >= 0):
        raise DomainError("eps_grid must be strictly decreasing")
    tail_window = min(tail_window, len(eps_grid))
    if tail_window < 1:
        raise DomainError("tail_window must be at least 1")
    if mode not in ("lower", "upper"):
        raise DomainError(f"mode must be 'lower' or 'upper', got {mode}")

    n = rows.shape[0]
    lo0, hi0 = alpha_bracket if alpha_bracket is not None else (0.01, 8.0)
    lo = np.full(n, float(lo0))
    hi = np.full(n, float(hi0))

    def classify(alphas):
        seq = rows + _log_scaling_grid(family, alphas[:, None], eps_grid)
        return _classify_tails(seq, tail_window)

    # want[lo] satisfied / want[hi] unsatisfied, where want is 'diverging'
    # for lower mode and 'not vanishing' for upper mode.
    def satisfied_low(cls):
        return cls == 1 if mode == "lower" else cls != -1

    for _ in range(10):
        bad = ~satisfied_low(classify(lo))
        if not bad.any():
            break
        lo[bad] /= 2.0
    for _ in range(10):
        bad = satisfied_low(classify(hi))
        if not bad.any():
            break
        hi[bad] *= 2.0
    low_end_bad = ~satisfied_low(classify(lo))
    high_end_bad = satisfied_low(classify(hi))
    bad = low_end_bad | high_end_bad
    if bad.any() and on_unbracketed == "error":
        raise BracketError(
            "trend identical at both bracket ends after widening 10 times "
            f"(mode={mode}, rows={np.flatnonzero(bad).tolist()[:5]})"
        )

    resolution = float(np.max(hi - lo)) / 2.0**iterations
    inconclusive = np.zeros(n, dtype=bool)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        cls = classify(mid)
        inconclusive |= cls == 0
        good = satisfied_low(cls)
        lo = np.where(good, mid, lo)
        hi = np.where(good, hi, mid)

    values = lo if mode == "lower" else hi
    extra = np.full(n, "", dtype=object)
    if bad.any():
        if mode == "lower":
            # no divergence anywhere: the finite-data scale is 0
            values = np.where(low_end_bad, 0.0, values)
            extra[low_end_bad] = "no-divergence"
            extra[high_end_bad & ~low_end_bad] = "unbracketed"
        else:
            # nothing vanishes: value grows past the bracket, report its top
            values = np.where(high_end_bad, hi, values)
            extra[high_end_bad] = "no-vanishing"
            extra[low_end_bad & ~high_end_bad] = "unbracketed"
    flag_rows = []
    for i in range(n):
        flags = []
        if inconclusive[i]:
            flags.append("inconclusive-trend")
        if extra[i]:
            flags.append(extra[i])
        flag_rows.append(tuple(flags))
    return values, flag_rows, resolution


def threshold_alpha(eps_grid, log_counts, family, mode, alpha_bracket=None,
                    tail_window=8, iterations=40):
    """Bisect for the alpha where count * gauge flips between growth and decay.

    log_counts holds log f(eps) for each grid point, f a positive count or
    mass.  Lower mode returns the sup of alphas whose tail is classified
    diverging, upper mode the inf classified vanishing; inconclusive probes
    shrink toward the mode's conservative side and are flagged.
    """
    values, flag_rows, resolution = threshold_alpha_batch(
        eps_grid, [log_counts], family, mode, alpha_bracket, tail_window, iterations
    )
    value = float(values[0])
    eps_grid = np.asarray(eps_grid, dtype=float)
    seq = np.asarray(log_counts, dtype=float) + _log_scaling_grid(family, value, eps_grid)
    diagnostics = {
        "mode": mode,
        "resolution": resolution,
        "flags": list(flag_rows[0]),
        "tail_window": int(min(tail_window, len(eps_grid))),
        "sequence": [[float(e), float(s)] for e, s in zip(eps_grid, seq)],
    }
    return ScaleEstimate(lower=value, upper=value, diagnostics=diagnostics)


def _iterated_log(x, times, what):
    for _ in range(times):
        if x <= 0.0:
            raise DomainError(f"log composition hit a non-positive {what} ({x})")
        x = math.log(x)
    return x


def ratio_estimate(samples=None, p=1, q=1, tail_window=2, eps_grid=None, log_counts=None):
    """liminf/limsup proxy from the ratio log^(p)(count) / log^(q)(1/eps).

    Accepts either samples as (eps, count) pairs, or eps_grid with
    log_counts for counts too large to represent directly.  Returns the
    (min, max) of the ratio over the tail window with the full sequence in
    the diagnostics.
    """
    if samples is not None:
        eps = [float(e) for e, _ in samples]
        logs = []
        for _, count in samples:
            if count <= 1:
                raise DomainError(f"counts must exceed 1, got {count}")
            logs.append(math.log(count))
    else:
        eps = [float(e) for e in eps_grid]
        logs = [float(v) for v in log_counts]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise DomainError("eps entries must be strictly decreasing")
    if not 1 <= tail_window <= len(eps):
        raise DomainError(f"tail_window must be in [1, {len(eps)}]")

    rho = []
    for e, lg in zip(eps, logs):
        num = _iterated_log(lg, p - 1, "count")
        den = _iterated_log(1.0 / e, q, "eps")
        if den <= 0.0:
            raise DomainError(f"log composition of 1/eps non-positive at eps={e}")
        rho.append(num / den)
    tail = rho[-tail_window:]
    diagnostics = {
        "sequence": [[e, r] for e, r in zip(eps, rho)],
        "tail_window": tail_window,
        "flags": [],
    }
    return ScaleEstimate(lower=min(tail), upper=max(tail), diagnostics=diagnostics)


def scale_estimate_from_counts(eps_grid, log_counts, family, tail_window=8,
                               alpha_bracket=None, iterations=40,
                               on_unbracketed="clamp"):
    """Two-sided estimate: threshold bisection both modes, ratio cross-check.

    Constant count sequences (a finite space below its resolution, or a Dirac
    mass) have scale 0 by convention and get the 'constant-counts' flag.
    """
    log_counts = np.asarray(log_counts, dtype=float)
    eps_grid = np.asarray(eps_grid, dtype=float)
    if np.allclose(log_counts, log_counts[0], atol=1e-12):
        return ScaleEstimate(0.0, 0.0, {"flags": ["constant-counts"], "resolution": 0.0})

    def one(mode):
        values, flag_rows, resolution = threshold_alpha_batch(
            eps_grid, [log_counts], family, mode, alpha_bracket, tail_window,
            iterations, on_unbracketed=on_unbracketed,
        )
        return float(values[0]), flag_rows[0], resolution

    lo_val, lo_flags, lo_res = one("lower")
    hi_val, hi_flags, hi_res = one("upper")
    lower = ScaleEstimate(lo_val, lo_val, {"resolution": lo_res, "flags": list(lo_flags)})
    upper = ScaleEstimate(hi_val, hi_val, {"resolution": hi_res, "flags": list(hi_flags)})
    diagnostics = {
        "resolution": max(lower.diagnostics["resolution"], upper.diagnostics["resolution"]),
        "flags": sorted(set(lower.flags) | set(upper.flags)),
        "tail_window": int(min(tail_window, len(eps_grid))),
    }
    try:
        ratio = ratio_estimate(eps_grid=eps_grid, log_counts=log_counts, p=family.p,
                               q=family.q, tail_window=min(tail_window, len(eps_grid)))
        diagnostics["ratio"] = [ratio.lower, ratio.upper]
        diagnostics["sequence"] = ratio.diagnostics["sequence"]
    except DomainError:
        diagnostics["ratio"] = None
    lo, hi = float(lower.lower), float(upper.upper)
    if lo > hi:  # bisection jitter on razor-thin flips; keep the pair ordered
        lo = hi = 0.5 * (lo + hi)
    return ScaleEstimate(lo, hi, diagnostics)
