"""Products of finite sets with first-differing-index metrics: exact oracles.

A model is a sequence of factor cardinalities (stored in log and log-log
form) plus a decreasing radius sequence eps_n.  Covering numbers and ball
masses have closed forms: the open ball of radius eps_n is the depth-n
cylinder, so the eps_n-covering number is the product of the first n
cardinalities and every ball carries its reciprocal as mass.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import product as iter_product

import numpy as np
from scipy.special import logsumexp

from .errors import DepthError, DomainError, SizeError
from .measure import EmpiricalMeasure
from .metric_core import FiniteMetricSpace

MATERIALIZE_CAP = 2**14
FLOOR_EXACT_CAP = 1e15  # apply the integer floor only below this cardinality


@dataclass(frozen=True)
class ProductSpaceSpec:
    """Cardinality sequence in log form plus the radius sequence in log form.

    log_log_cards holds log(log Card Z_k) exactly even where log Card
    itself overflows a double (the inhomogeneous construction reaches
    cardinalities with log Card ~ exp(2k)).
    """

    log_cards: np.ndarray
    log_eps: np.ndarray
    metadata: dict = None
    log_log_cards: np.ndarray = None

    def __post_init__(self):
        lc = np.asarray(self.log_cards, dtype=float)
        le = np.asarray(self.log_eps, dtype=float)
        if len(lc) != len(le):
            raise DomainError("log_cards and log_eps must have equal length")
        if len(lc) == 0:
            raise DomainError("model must have at least one factor")
        if np.any(lc <= 0):
            raise DomainError("log cardinalities must be positive")
        if np.any(le >= 0) or np.any(np.diff(le) >= 0):
            raise DomainError("log_eps must be negative and strictly decreasing")
        ratios = le[1:] / le[:-1]
        if np.any(ratios < 0.5) or np.any(ratios > 2.0):
            raise DomainError("successive log_eps ratios must stay within [0.5, 2]")
        llc = self.log_log_cards
        if llc is None:
            with np.errstate(over="ignore"):
                llc = np.log(lc)
        object.__setattr__(self, "log_cards", lc)
        object.__setattr__(self, "log_eps", le)
        object.__setattr__(self, "log_log_cards", np.asarray(llc, dtype=float))

    @property
    def k_max(self):
        return len(self.log_cards)

    def to_json(self):
        return json.dumps(
            {
                "log_cards": self.log_cards.tolist(),
                "log_eps": self.log_eps.tolist(),
                "metadata": self.metadata,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(np.asarray(data["log_cards"], dtype=float),
                   np.asarray(data["log_eps"], dtype=float),
                   data.get("metadata"))


def uniform_spec(card, depth, eps_base=math.e):
    """Model with constant factor cardinality and eps_n = base^-n."""
    if card < 2:
        raise DomainError(f"cardinality must be at least 2, got {card}")
    log_cards = np.full(depth, math.log(card))
    log_eps = -math.log(eps_base) * np.arange(1, depth + 1, dtype=float)
    return ProductSpaceSpec(log_cards, log_eps)


def exact_covering_log(spec, n):
    """log of the eps_n-covering number: sum of the first n log cardinalities."""
    if not 0 <= n <= spec.k_max:
        raise DomainError(f"n must be in [0, {spec.k_max}], got {n}")
    return float(spec.log_cards[:n].sum())


def exact_ball_mass_log(spec, n):
    """log mass of any eps_n-ball under the uniform product measure."""
    return -exact_covering_log(spec, n)


def lambda_sequence(spec, C, n_max=None):
    """The order diagnostic lambda_n = log(sum_{k<=n} log Card Z_k) / (n log C).

    The inner sum is evaluated as a log-sum-exp over log(log Card), which
    agrees with plain floating-point summation wherever that does not
    overflow and stays finite everywhere else.
    """
    if C <= 1:
        raise DomainError(f"C must exceed 1, got {C}")
    n_max = spec.k_max if n_max is None else n_max
    if not 1 <= n_max <= spec.k_max:
        raise DomainError(f"n_max must be in [1, {spec.k_max}], got {n_max}")
    out = np.empty(n_max)
    logc = math.log(C)
    llc = spec.log_log_cards[:n_max]
    for n in range(1, n_max + 1):
        out[n - 1] = logsumexp(llc[:n]) / (n * logc)
    return out


def inhomogeneous_spec(alpha, beta, k_max):
    """Factor sequence alternating double-exponential growth rates.

    Cardinality exponents switch between beta and alpha on index blocks
    [c^(2j), c^(2j+1)) and [c^(2j+1), c^(2j+2)) with c = floor(alpha/beta)+1;
    radii are eps_n = exp(-n).  The floor of exp(exp(rate*k)) is applied
    exactly while the cardinality fits 1e15 and dropped above (the orders
    only depend on log-cardinality asymptotics).
    """
    if not alpha >= beta > 0:
        raise DomainError(f"need alpha >= beta > 0, got {alpha}, {beta}")
    c = int(alpha / beta) + 1
    log_log = np.empty(k_max)
    for k in range(1, k_max + 1):
        j = 0
        while c ** (2 * j + 2) <= k:
            j += 1
        rate = beta if k < c ** (2 * j + 1) else alpha
        exponent = rate * k
        if exponent <= math.log(math.log(FLOOR_EXACT_CAP)):
            u = math.floor(math.exp(math.exp(exponent)))
            log_log[k - 1] = math.log(math.log(u))
        else:
            log_log[k - 1] = exponent
    with np.errstate(over="ignore"):
        log_cards = np.exp(log_log)
    log_eps = -np.arange(1, k_max + 1, dtype=float)
    return ProductSpaceSpec(log_cards, log_eps,
                            metadata={"alpha": alpha, "beta": beta, "c": c},
                            log_log_cards=log_log)


def inhomogeneous_orders(spec, n_max=None, tail_fraction=0.5):
    """(lower, upper) order estimates read at the block-boundary witnesses.

    The lower witnesses sit at the last index of each slow block
    (m_j = c^(2j+1) - 1), the upper witnesses at the first index of each
    fast block (n_j = c^(2j+1)); only the deepest tail_fraction of each
    witness subsequence enters the min/max.
    """
    if not spec.metadata or "c" not in spec.metadata:
        raise DomainError("spec was not built by the inhomogeneous constructor")
    c = spec.metadata["c"]
    n_max = spec.k_max if n_max is None else min(n_max, spec.k_max)
    if n_max < c**6 - 1:
        raise DepthError(
            f"need at least 3 full block pairs (n_max >= {c**6 - 1}), got {n_max}"
        )
    lam = lambda_sequence(spec, math.e, n_max)
    lower_idx, upper_idx = [], []
    j = 0
    while c ** (2 * j + 1) <= n_max:
        boundary = c ** (2 * j + 1)
        if boundary - 1 >= 1:
            lower_idx.append(boundary - 1)
        upper_idx.append(boundary)
        j += 1
    keep = max(1, math.ceil(tail_fraction * len(lower_idx)))
    lower_idx = lower_idx[-keep:]
    keep = max(1, math.ceil(tail_fraction * len(upper_idx)))
    upper_idx = upper_idx[-keep:]
    lower = min(lam[i - 1] for i in lower_idx)
    upper = max(lam[i - 1] for i in upper_idx)
    return float(lower), float(upper)


def materialize(spec, n):
    """Enumerate the depth-n truncation as a finite ultrametric space.

    The distance between two tuples is eps_m for the first differing
    coordinate m; the measure is the uniform product measure.  Requires
    integer cardinalities >= 2 and at most 2^14 points.
    """
    if not 1 <= n <= spec.k_max:
        raise DomainError(f"n must be in [1, {spec.k_max}], got {n}")
    cards = []
    total = 1
    for k in range(n):
        lc = spec.log_cards[k]
        card = round(math.exp(lc)) if lc < 40 else None
        if card is None or card < 2 or abs(math.log(card) - lc) > 1e-9:
            raise DomainError(
                f"factor {k + 1} has no exact integer cardinality >= 2 (log {lc})"
            )
        cards.append(card)
        total *= card
        if total > MATERIALIZE_CAP:
            raise SizeError(f"materialization capped at {MATERIALIZE_CAP} points")
    tuples = np.array(list(iter_product(*[range(c) for c in cards])), dtype=np.int64)
    N = len(tuples)
    first_diff = np.full((N, N), n, dtype=np.int16)
    for k in range(n - 1, -1, -1):
        neq = tuples[:, k][:, None] != tuples[:, k][None, :]
        first_diff[neq] = k
    eps = np.exp(spec.log_eps[:n])
    dist = np.where(first_diff == n, 0.0, eps[np.minimum(first_diff, n - 1)])
    labels = ["".join(str(int(v)) for v in row) for row in tuples]
    space = FiniteMetricSpace.create(labels, dist, check_triangle=False)
    return space, EmpiricalMeasure.uniform(space)
