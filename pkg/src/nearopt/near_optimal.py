"""Near-optimal solutions: the penalized DP, its Z processes, the exact
constrained oracle and the pattern-swap constructor.

The penalized problem maximizes ``f(B) + theta * |B △ A|`` where ``A`` is the
optimum.  Objective values are accumulated item by item exactly as in
:func:`nearopt.chain.benefit`, with the bonus (``theta`` or ``0.0``) added
after each item's own term, so DP and enumeration agree bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from ._validation import check_subset, check_theta, subset_to_string
from .chain import (
    BRUTE_FORCE_MAX_N,
    DegenerateInstanceError,
    _chunk_values,
    _enumerate_best,
    as_costs,
    benefit,
    dp_solve,
)
from .cost_models import CostDistribution, sample_costs
from .seeding import derive_seed

CEIL_SLACK = 1e-9


def required_differences(delta, n):
    """Integer form of the constraint |B △ A| >= delta * n."""
    return max(0, math.ceil(delta * n - CEIL_SLACK))


@dataclass
class PenalizedResult:
    theta: float
    bSet: np.ndarray
    penalizedValue: float
    deltaN: float
    epsN: float
    zL: np.ndarray | None
    zR: np.ndarray | None
    jSigns: np.ndarray

    @property
    def bits(self):
        return subset_to_string(self.bSet)


def j_signs(a_opt):
    """+1 where the item is outside the optimum, -1 where it is inside."""
    if isinstance(a_opt, str):
        a_opt = check_subset(a_opt, len(a_opt), "aOpt")
    a = np.asarray(a_opt, dtype=bool)
    return np.where(a, -1, 1).astype(np.int8)


def penalized_solve(instance, aOpt, theta, with_z=True, base_value=None) -> PenalizedResult:
    """Exact maximizer of f(B) + theta |B △ A| by weight augmentation.

    Ties prefer the branch that agrees with ``aOpt``.  ``base_value`` may
    pass f(A) when already known.
    """
    costs = as_costs(instance)
    n = costs.size + 1
    a = check_subset(aOpt, n, "aOpt")
    theta = check_theta(theta)
    value, bits = _penalized_core(costs.tolist(), a.tolist(), theta)
    b = np.array(bits, dtype=bool)

    f_a = benefit(costs, a) if base_value is None else base_value
    f_b = benefit(costs, b)
    zl = zr = None
    if with_z:
        zl, zr = z_processes(costs, a, theta)
    return PenalizedResult(
        theta=theta,
        bSet=b,
        penalizedValue=float(value),
        deltaN=float(np.count_nonzero(a != b)) / n,
        epsN=(f_a - f_b) / n,
        zL=zl,
        zR=zr,
        jSigns=j_signs(a),
    )


def _penalized_core(c, al, theta):
    """List-based weight-augmented DP; returns (value, membership list)."""
    n = len(al)
    bonus_in = [0.0 if x else theta for x in al]
    bonus_out = [theta if x else 0.0 for x in al]
    v = 1.0 + bonus_in[0]
    w = 0.0 + bonus_out[0]
    v_prev_in = [False] * n
    w_prev_in = [False] * n
    for j in range(1, n):
        prev_a = al[j - 1]
        take = v - c[j - 1]
        if take > w or (take == w and prev_a):
            nv = (take + 1.0) + bonus_in[j]
            v_prev_in[j] = True
        else:
            nv = (w + 1.0) + bonus_in[j]
        if v > w or (v == w and prev_a):
            nw = v + bonus_out[j]
            w_prev_in[j] = True
        else:
            nw = w + bonus_out[j]
        v, w = nv, nw
    last_in = v > w or (v == w and al[-1])
    value = v if last_in else w
    bits = [False] * n
    cur = last_in
    for j in range(n - 1, -1, -1):
        bits[j] = cur
        cur = v_prev_in[j] if cur else w_prev_in[j]
    return value, bits


def z_processes(instance, aOpt, theta):
    """Left/right value differences of the penalized problem.

    Z^L_1 = 1 + θJ_1,  Z^L_{i+1} = 1 - min(Z^L_i, ξ_i) 1(Z^L_i > 0) + θJ_{i+1},
    and the mirror image from the right end.
    """
    costs = as_costs(instance)
    n = costs.size + 1
    a = check_subset(aOpt, n, "aOpt")
    c = costs.tolist()
    tj = [(-theta if x else theta) for x in a.tolist()]
    zl = [0.0] * n
    z = 1.0 + tj[0]
    zl[0] = z
    for j in range(n - 1):
        if z > 0:
            z = (1.0 - (z if z < c[j] else c[j])) + tj[j + 1]
        else:
            z = 1.0 + tj[j + 1]
        zl[j + 1] = z
    zr = [0.0] * n
    z = 1.0 + tj[n - 1]
    zr[n - 1] = z
    for j in range(n - 2, -1, -1):
        if z > 0:
            z = (1.0 - (z if z < c[j] else c[j])) + tj[j]
        else:
            z = 1.0 + tj[j]
        zr[j] = z
    return np.array(zl), np.array(zr)


def penalized_pair_decision(zl, xi, zr):
    """Argmax of the relative benefits (zl + zr - xi, zl, zr, 0) for a pair.

    The Z values already carry each item's own bonus.  Raises on ties.
    """
    if xi < zl and xi < zr:
        return True, True
    zr_pos = zr if zr > 0 else 0.0
    zl_pos = zl if zl > 0 else 0.0
    if zr_pos < zl and zr_pos < xi:
        return True, False
    if zl_pos < zr and zl_pos < xi:
        return False, True
    if zl < 0 and zr < 0:
        return False, False
    raise DegenerateInstanceError(
        f"non-unique or degenerate pair: Z^L={zl}, xi={xi}, Z^R={zr}"
    )


def reconstruct_penalized_from_z(instance, aOpt, theta, zL, zR, jSigns=None) -> np.ndarray:
    """Rebuild the penalized optimum pair by pair from the Z processes."""
    costs = as_costs(instance)
    n = costs.size + 1
    check_subset(aOpt, n, "aOpt")
    if n == 1:
        zl = float(np.asarray(zL)[0])
        if zl == 0:
            raise DegenerateInstanceError("tie for the single item")
        return np.array([zl > 0])
    zl = np.asarray(zL, dtype=np.float64).tolist()
    zr = np.asarray(zR, dtype=np.float64).tolist()
    c = costs.tolist()
    out = [None] * n
    for i in range(n - 1):
        left, right = penalized_pair_decision(zl[i], c[i], zr[i + 1])
        if out[i] is not None and out[i] != left:
            raise DegenerateInstanceError(f"inconsistent membership for item {i + 1}")
        out[i] = left
        out[i + 1] = right
    return np.array(out, dtype=bool)


def _bonus_rows(bits, a, theta):
    return np.where(bits != a[None, :], theta, 0.0)


def brute_force_penalized(instance, aOpt, theta):
    """Enumeration oracle: returns (max value, lexicographically smallest maximizer, count)."""
    costs = as_costs(instance)
    n = costs.size + 1
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}")
    a = check_subset(aOpt, n, "aOpt")
    return _enumerate_best(n, lambda b: _chunk_values(b, costs, _bonus_rows(b, a, theta)))


# constrained oracle --------------------------------------------------------------


@dataclass
class ConstrainedResult:
    deltaTarget: float
    epsExact: float
    achiever: np.ndarray
    differences: int

    @property
    def bits(self):
        return subset_to_string(self.achiever)


def exact_constrained_epsilon(instance, aOpt, delta) -> ConstrainedResult:
    """Smallest gap f(A) - f(B) over B with |B △ A| >= ⌈δn⌉, by an O(n^2) DP.

    State: (item membership, differences so far capped at m = ⌈δn⌉).
    """
    costs = as_costs(instance)
    n = costs.size + 1
    a = check_subset(aOpt, n, "aOpt")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    m = required_differences(delta, n)
    if m > n:
        raise ValueError(f"infeasible: need {m} differences among {n} items")
    f_a = benefit(costs, a)
    if m == 0:
        return ConstrainedResult(delta, 0.0, a.copy(), 0)

    ninf = -np.inf
    size = m + 1
    # val[s, cnt]: best prefix value with last item membership s
    val = np.full((2, size), ninf)
    d_in = int(not a[0])
    d_out = int(a[0])
    val[1, min(d_in, m)] = 1.0
    val[0, min(d_out, m)] = 0.0
    prev_s = np.zeros((n, 2, size), dtype=bool)
    from_cap = np.zeros((n, 2), dtype=bool)  # predecessor count was m itself

    for j in range(1, n):
        xi = costs[j - 1]
        new = np.full((2, size), ninf)
        for t in (0, 1):
            diff = int(bool(t) != bool(a[j]))
            if t:
                c_from_in = (val[1] - xi) + 1.0
                c_from_out = val[0] + 1.0
            else:
                c_from_in = val[1]
                c_from_out = val[0]
            # shift counts by diff, then fold the overflow into the cap
            sh_in = np.full(size, ninf)
            sh_out = np.full(size, ninf)
            if diff:
                sh_in[1:] = c_from_in[:-1]
                sh_out[1:] = c_from_out[:-1]
            else:
                sh_in[:] = c_from_in
                sh_out[:] = c_from_out
            pick_in = sh_in > sh_out
            best = np.where(pick_in, sh_in, sh_out)
            ps = pick_in.copy()
            if diff:
                cap_val_in = c_from_in[m]
                cap_val_out = c_from_out[m]
                cap_in = cap_val_in > cap_val_out
                cap_best = cap_val_in if cap_in else cap_val_out
                if cap_best > best[m]:
                    best[m] = cap_best
                    ps[m] = cap_in
                    from_cap[j, t] = True
            new[t] = best
            prev_s[j, t] = ps
        val = new

    last = 1 if val[1, m] > val[0, m] else 0
    best_val = val[last, m]
    bits = np.zeros(n, dtype=bool)
    s, cnt = last, m
    for j in range(n - 1, -1, -1):
        bits[j] = bool(s)
        if j == 0:
            break
        diff = int(bool(s) != bool(a[j]))
        ps = prev_s[j, s, cnt]
        if cnt == m and diff and from_cap[j, s]:
            pc = m
        else:
            pc = cnt - diff
        s, cnt = int(ps), pc
    return ConstrainedResult(delta, (f_a - float(best_val)) / n, bits,
                             int(np.count_nonzero(bits != a)))


def brute_force_constrained(instance, aOpt, delta):
    """Enumeration oracle for :func:`exact_constrained_epsilon`; returns the gap per item."""
    costs = as_costs(instance)
    n = costs.size + 1
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}")
    a = check_subset(aOpt, n, "aOpt")
    m = required_differences(delta, n)
    f_a = benefit(costs, a)

    def values(bits):
        v = _chunk_values(bits, costs)
        ok = np.count_nonzero(bits != a[None, :], axis=1) >= m
        return np.where(ok, v, -np.inf)

    best, _, _ = _enumerate_best(n, values)
    return (f_a - best) / n


# pattern swap -----------------------------------------------------------------------


def omega_event(costs, g, k, alpha):
    """Window event at 0-based item ``g`` for the window [g, g+2k].

    ``costs[j]`` joins items j and j+1; the cost to the left of item 0 is 0.
    Returns False when the window does not fit.
    """
    last = g + 2 * k
    if last > costs.size - 1:
        return False
    run = costs[g:last]  # ξ_g .. ξ_{g+2k-1}
    if not (np.all(run[:-1] > run[1:]) and run[-1] > 0.5 > costs[last]):
        return False
    left = costs[g - 1] if g > 0 else 0.0
    if not left + costs[g] < 1.0:
        return False
    if not run[-1] + costs[last] < 1.0:
        return False
    s = costs[g] + run[-1]
    return 1.0 < s < 1.0 + 2 * k * alpha


def pattern_swap_construct(instance, aOpt, alpha, k):
    """Swap the alternating pattern for the doubled-endpoint one in every
    window [g, g+2k] (g = 1, 2k+2, 4k+3, ...) whose cost event holds.

    Returns ``(B, windows_used)``; each swap lowers the benefit by
    ξ_g + ξ_{g+2k-1} - 1.
    """
    costs = as_costs(instance)
    n = costs.size + 1
    a = check_subset(aOpt, n, "aOpt")
    k = int(k)
    if k < 2 or alpha <= 0 or alpha * k >= 0.5:
        raise ValueError("need k >= 2, alpha > 0 and alpha * k < 1/2")
    b = a.copy()
    used = 0
    width = 2 * k + 1
    pattern = np.zeros(width, dtype=bool)
    pattern[[0, 1, width - 1]] = True
    pattern[3:width - 1:2] = True
    for g in _window_hits(costs, k, alpha):
        b[g:g + width] = pattern
        used += 1
    return b, used


def _window_hits(costs, k, alpha):
    """0-based starts of qualifying windows, vectorized over the window grid."""
    width = 2 * k + 1
    starts = np.arange(0, costs.size - 2 * k, width)
    if starts.size == 0:
        return starts
    run = np.stack([costs[starts + t] for t in range(2 * k)], axis=1)
    nxt = costs[starts + 2 * k]
    ok = np.all(run[:, :-1] > run[:, 1:], axis=1) & (run[:, -1] > 0.5) & (nxt < 0.5)
    left = np.where(starts > 0, costs[np.maximum(starts - 1, 0)], 0.0)
    ok &= left + run[:, 0] < 1.0
    ok &= run[:, -1] + nxt < 1.0
    s = run[:, 0] + run[:, -1]
    ok &= (s > 1.0) & (s < 1.0 + 2 * k * alpha)
    return starts[ok]


def window_count(n, k):
    """Number of complete windows [g, g+2k] with a cost to their right."""
    costs_len = n - 1
    return max(0, len(range(0, costs_len - 2 * k, 2 * k + 1)))


# sweeps ---------------------------------------------------------------------------


def _sweep_rep(dist, n, thetas, seed, index):
    costs = sample_costs(dist, n - 1, derive_seed(seed, "sweep", index))
    base = dp_solve(costs, with_x=False, check_unique=False)
    out = []
    for th in thetas:
        if th == 0:
            out.append((0.0, 0.0))
            continue
        r = penalized_solve(costs, base.optimal, th, with_z=False, base_value=base.value)
        out.append((r.deltaN, r.epsN))
    return out


def theta_sweep(dist: CostDistribution, n, thetas, reps, seed=0, jobs=1, return_samples=False):
    """Average (deltaN, epsN) of the penalized optimum over ``reps`` instances.

    The same instances serve every theta.  Output rows are dicts with keys
    theta, mean_delta, se_delta, mean_eps, se_eps, reps, n, dist, seed.
    """
    thetas = [check_theta(t) for t in thetas]
    per_rep = Parallel(n_jobs=jobs)(
        delayed(_sweep_rep)(dist, n, thetas, seed, r) for r in range(reps)
    )
    arr = np.array(per_rep, dtype=np.float64).reshape(reps, len(thetas), 2)
    rows = []
    for t, th in enumerate(thetas):
        d = arr[:, t, 0]
        e = arr[:, t, 1]
        rows.append(
            dict(
                theta=th,
                mean_delta=float(d.mean()),
                se_delta=_se(d),
                mean_eps=float(e.mean()),
                se_eps=_se(e),
                reps=reps,
                n=n,
                dist=str(dist),
                seed=seed,
            )
        )
    if return_samples:
        return rows, arr
    return rows


def _se(x):
    return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def pattern_swap_sweep(dist: CostDistribution, n, k, alphas, seed=0):
    """Run the window construction on one instance for several α.

    Rows hold the window count, accepted windows, acceptance rate q(α), the
    mean loss per accepted window, the loss per tested window r(α), and the
    resulting deltaN / epsN.
    """
    costs = sample_costs(dist, n - 1, derive_seed(seed, "pattern-swap", 0))
    base = dp_solve(costs, with_x=False, check_unique=False)
    windows = window_count(n, k)
    rows = []
    for alpha in alphas:
        b, used = pattern_swap_construct(costs, base.optimal, alpha, k)
        loss = base.value - benefit(costs, b)
        rows.append(dict(
            alpha=float(alpha), k=int(k), n=int(n), windows=windows, accepted=used,
            rate=used / windows if windows else float("nan"),
            mean_loss=loss / used if used else float("nan"),
            loss_per_window=loss / windows if windows else float("nan"),
            delta=float(np.count_nonzero(b != base.optimal)) / n,
            eps=loss / n, dist=str(dist), seed=seed,
        ))
    return rows


__all__ = [
    "PenalizedResult",
    "ConstrainedResult",
    "penalized_solve",
    "z_processes",
    "reconstruct_penalized_from_z",
    "brute_force_penalized",
    "exact_constrained_epsilon",
    "brute_force_constrained",
    "pattern_swap_construct",
    "theta_sweep",
    "pattern_swap_sweep",
    "j_signs",
    "required_differences",
]
