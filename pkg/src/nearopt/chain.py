"""Exact solution of the chain problem

    maximize  f(A) = |A| - sum_i xi_i 1(i in A, i+1 in A)   over A ⊆ {1..n}.

Positions are 0-based internally: item ``j`` (0..n-1) and cost ``costs[j]``
joins items ``j`` and ``j+1``.  Every routine that produces an objective
value accumulates it in the same left-to-right order as :func:`benefit`, so
values from the DP and the brute-force oracle compare equal bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_costs, check_subset, subset_to_string

BRUTE_FORCE_MAX_N = 24
_CHUNK = 1 << 18


class DegenerateInstanceError(ValueError):
    """Raised when an inclusion rule meets an exact tie."""


@dataclass(frozen=True)
class Instance:
    n: int
    costs: np.ndarray = field(repr=False)

    def __post_init__(self):
        costs = check_costs(self.costs) if len(self.costs) else np.zeros(0)
        if self.n < 1 or costs.size != self.n - 1:
            raise ValueError(f"instance with n={self.n} needs {self.n - 1} costs, got {costs.size}")
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)

    @classmethod
    def from_costs(cls, costs):
        costs = np.asarray(costs, dtype=np.float64).reshape(-1)
        return cls(costs.size + 1, costs)


def as_costs(instance) -> np.ndarray:
    if isinstance(instance, Instance):
        return instance.costs
    arr = np.asarray(instance, dtype=np.float64).reshape(-1)
    return check_costs(arr) if arr.size else arr


@dataclass
class SolveResult:
    value: float
    optimal: np.ndarray
    unique: bool | None
    xL: np.ndarray | None = None
    xR: np.ndarray | None = None

    @property
    def bits(self):
        return subset_to_string(self.optimal)


# objective --------------------------------------------------------------------


def benefit(instance, subset) -> float:
    """|A| minus the costs of adjacent chosen pairs, accumulated left to right."""
    costs = as_costs(instance)
    n = costs.size + 1
    bits = check_subset(subset, n)
    return float(_benefit_list(costs.tolist(), bits.tolist()))


def _benefit_list(c, bits):
    val = 0.0
    prev = False
    for j, b in enumerate(bits):
        if b:
            val = (val - c[j - 1]) + 1.0 if prev else val + 1.0
        prev = b
    return val


def _bits_of_codes(codes, n):
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(bool)


def _chunk_values(bits, costs, bonus_rows=None):
    # mirrors benefit(): val = (val - xi) + 1 when the previous item is also in
    val = np.zeros(bits.shape[0])
    for j in range(bits.shape[1]):
        col = bits[:, j]
        if j == 0:
            add = val + 1.0
        else:
            add = np.where(bits[:, j - 1], (val - costs[j - 1]) + 1.0, val + 1.0)
        val = np.where(col, add, val)
        if bonus_rows is not None:
            val = val + bonus_rows[:, j]
    return val


def _enumerate_best(n, value_fn):
    """Exhaustive max over all 2^n bit strings; item 0 is the most significant bit."""
    best = -np.inf
    best_code = -1
    count = 0
    total = 1 << n
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        bits = _bits_of_codes(codes, n)
        vals = value_fn(bits)
        m = vals.max()
        if m > best:
            best = m
            hits = np.flatnonzero(vals == m)
            best_code = int(codes[hits[0]])
            count = hits.size
        elif m == best:
            count += int(np.count_nonzero(vals == m))
    return float(best), _bits_of_codes(np.array([best_code]), n)[0], count


def brute_force_solve(instance) -> SolveResult:
    """Enumerate all subsets; ties resolved to the lexicographically smallest bit string."""
    costs = as_costs(instance)
    n = costs.size + 1
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    value, bits, count = _enumerate_best(n, lambda b: _chunk_values(b, costs))
    return SolveResult(value, bits, count == 1)


# dynamic programming ------------------------------------------------------------


def _forward(costs):
    """V/W recursion with backpointers; ties go to the 'exclude' branch."""
    n = len(costs) + 1
    v, w = 1.0, 0.0
    from_v_in = [False] * n  # V_{j}: was item j-1 in?
    from_w_in = [False] * n  # W_{j}: was item j-1 in?
    for j in range(1, n):
        xi = costs[j - 1]
        take = v - xi
        if take > w:
            nv = take + 1.0
            from_v_in[j] = True
        else:
            nv = w + 1.0
        if v > w:
            nw = v
            from_w_in[j] = True
        else:
            nw = w
        v, w = nv, nw
    return v, w, from_v_in, from_w_in


def _backtrack(n, last_in, from_v_in, from_w_in):
    bits = [False] * n
    cur = last_in
    for j in range(n - 1, -1, -1):
        bits[j] = cur
        cur = from_v_in[j] if cur else from_w_in[j]
    return np.array(bits, dtype=bool)


def x_processes(instance):
    """Left and right value-difference processes, each in [0, 1]."""
    costs = as_costs(instance)
    c = costs.tolist()
    n = len(c) + 1
    xl = [1.0] * n
    for j in range(n - 1):
        a = 1.0 - xl[j]
        b = 1.0 - c[j]
        xl[j + 1] = a if a > b else b
    xr = [1.0] * n
    for j in range(n - 1, 0, -1):
        a = 1.0 - xr[j]
        b = 1.0 - c[j - 1]
        xr[j - 1] = a if a > b else b
    return np.array(xl), np.array(xr)


def dp_solve(instance, with_x=True, check_unique=True) -> SolveResult:
    """O(n) forward recursion plus backtracking."""
    costs = as_costs(instance)
    n = costs.size + 1
    v, w, fv, fw = _forward(costs.tolist())
    value = v if v > w else w
    bits = _backtrack(n, v > w, fv, fw)
    xl = xr = None
    if with_x:
        xl, xr = x_processes(costs)
    unique = None
    if check_unique:
        unique = _uniqueness(costs, value)
    return SolveResult(float(value), bits, unique, xl, xr)


def _uniqueness(costs, value):
    n = costs.size + 1
    if n == 1:
        return True
    if n >= 3 and np.any(costs[:-1] + costs[1:] < 1.0):
        return True
    # no short adjacent pair: non-unique iff n even and M = n/2
    return not (n % 2 == 0 and value == n / 2)


def check_uniqueness(instance) -> bool:
    costs = as_costs(instance)
    if costs.size + 1 < 2:
        raise ValueError("uniqueness check needs n >= 2")
    return _uniqueness(costs, dp_solve(costs, with_x=False, check_unique=False).value)


def pair_decision(a, xi, b):
    """Which of items (i, i+1) are in, given X^L_i = a, xi_i and X^R_{i+1} = b.

    Returns a pair of booleans; raises on ties.
    """
    if xi < a and xi < b:
        return True, True
    if b < a and b < xi:
        return True, False
    if a < b and a < xi:
        return False, True
    raise DegenerateInstanceError(
        f"non-unique or degenerate instance: tie among X^L={a}, xi={xi}, X^R={b}"
    )


def reconstruct_from_inclusion(instance, xL, xR) -> np.ndarray:
    """Rebuild the optimum pair by pair from the X processes."""
    costs = as_costs(instance)
    n = costs.size + 1
    if n == 1:
        return np.ones(1, dtype=bool)
    xl = np.asarray(xL, dtype=np.float64).tolist()
    xr = np.asarray(xR, dtype=np.float64).tolist()
    c = costs.tolist()
    out = [None] * n
    for i in range(n - 1):
        left, right = pair_decision(xl[i], c[i], xr[i + 1])
        if out[i] is not None and out[i] != left:
            raise DegenerateInstanceError(f"inconsistent membership for item {i + 1}")
        out[i] = left
        out[i + 1] = right
    return np.array(out, dtype=bool)


# invariants ---------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    rule: str
    index: int  # 1-based item index where the rule is anchored
    boundary: bool


def verify_optimal_invariants(instance, optimal) -> list[Violation]:
    """Local structure rules that any optimum satisfies away from the ends.

    (a) xi_{i-1} + xi_i <= 1 implies i in A;
    (c) i, i+1 in A implies xi_i <= 1;
    (d) xi_i + xi_{i+1} > 1 forbids i, i+1, i+2 all in A;
    (e) on a strictly descending cost run with all adjacent sums > 1, A
        alternates (checked on every length-4 window, which implies it for
        every longer run).
    Violations whose window touches item 1 or item n carry ``boundary=True``.
    """
    c = as_costs(instance)
    n = c.size + 1
    a = check_subset(optimal, n, "optimal")
    out = []

    def bnd(lo, hi):  # 0-based item span
        return lo <= 0 or hi >= n - 1

    s = c[:-1] + c[1:] if n >= 3 else np.zeros(0)
    # (a): item j (0-based, 1..n-2) uses costs j-1 and j
    for j in np.flatnonzero((s <= 1.0) & ~a[1:n - 1]) + 1:
        out.append(Violation("a", int(j) + 1, bnd(j - 1, j + 1)))
    # (c)
    for j in np.flatnonzero(a[:-1] & a[1:] & (c > 1.0)):
        out.append(Violation("c", int(j) + 1, bnd(j, j + 1)))
    # (d)
    if n >= 3:
        trip = a[:-2] & a[1:-1] & a[2:]
        for j in np.flatnonzero(trip & (s > 1.0)):
            out.append(Violation("d", int(j) + 1, bnd(j, j + 2)))
    # (e) with k = 2: window [g, g+3] needs costs g..g+4
    if n >= 6:
        m = n - 5
        desc = np.ones(m, dtype=bool)
        for t in range(4):
            desc &= c[t:t + m] > c[t + 1:t + 1 + m]
        for t in range(3):
            desc &= s[t:t + m] > 1.0
        win = np.stack([a[t:t + m] for t in range(4)], axis=1)
        alt = np.all(win[:, 1:] != win[:, :-1], axis=1)
        for g in np.flatnonzero(desc & ~alt):
            out.append(Violation("e", int(g) + 1, bnd(g, g + 3)))
    return out


def interior(violations):
    return [v for v in violations if not v.boundary]


# file format --------------------------------------------------------------------


def read_instance(path) -> Instance:
    """First line n, second line the n-1 costs separated by whitespace."""
    lines = Path(path).read_text().split("\n")
    lines = [ln for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty instance file")
    n = int(lines[0].strip())
    costs = [float(t) for t in " ".join(lines[1:]).split()]
    return Instance(n, np.array(costs, dtype=np.float64))


def write_instance(path, instance: Instance):
    body = " ".join(repr(float(x)) for x in instance.costs)
    Path(path).write_text(f"{instance.n}\n{body}\n")


# estimator wrapper ---------------------------------------------------------------


class ChainOptimizer(BaseEstimator):
    """Estimator-style wrapper: ``fit`` solves a cost vector.

    After fitting, ``optimal_`` holds the membership mask, ``value_`` the
    optimum and ``xL_``/``xR_`` the value-difference processes.
    ``method`` is ``"dp"`` or ``"brute"``.
    """

    def __init__(self, method="dp"):
        self.method = method

    def fit(self, X, y=None):
        costs = as_costs(X)
        if self.method == "dp":
            res = dp_solve(costs)
        elif self.method == "brute":
            res = brute_force_solve(costs)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.n_items_ = costs.size + 1
        self.value_ = res.value
        self.optimal_ = res.optimal
        self.unique_ = res.unique
        self.xL_, self.xR_ = res.xL, res.xR
        return self

    def predict(self, X=None):
        """Membership mask of the fitted optimum."""
        if not hasattr(self, "optimal_"):
            raise AttributeError("ChainOptimizer is not fitted yet")
        return self.optimal_.copy()

    def score(self, X, y=None):
        """Per-item optimum M_n / n of the fitted instance."""
        return self.value_ / self.n_items_
