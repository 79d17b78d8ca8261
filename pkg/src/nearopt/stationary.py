"""Simulation of the infinite stationary processes and the estimators built on them.

Streams are cut from a long finite window.  Once a cost pair with
``ξ_{i-1} + ξ_i <= 1 - τ`` has been seen, the left processes X^L and Z^L no
longer depend on the left boundary (and symmetrically on the right), so the
emitted middle section has exactly the stationary law as long as such pairs
occur inside both margins.  This is checked, not assumed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from ._validation import check_theta
from .chain import _backtrack, _benefit_list, _forward, dp_solve, x_processes
from .cost_models import CostDistribution, sample_costs
from .near_optimal import _penalized_core, penalized_solve, z_processes
from .seeding import derive_seed, make_rng

TAU_CANDIDATES = (0.4, 0.3, 0.2, 0.1, 0.05)
DEFAULT_MARGIN = 1000
N_BATCHES = 30
CYCLES_PER_UNIT = 2000


class InvariantViolation(AssertionError):
    """A property that must hold on every sample failed."""


def choose_tau(dist: CostDistribution) -> float:
    """Largest candidate τ with G(1/2 - τ) >= 0.05."""
    for tau in TAU_CANDIDATES:
        if float(dist.cdf(0.5 - tau)) >= 0.05:
            return tau
    raise ValueError(f"{dist}: G(1/2 - τ) < 0.05 for every τ in {TAU_CANDIDATES}")


def _check_tau(dist, tau, theta=None):
    if tau is None:
        tau = choose_tau(dist)
    if not 0 < tau < 0.5 or float(dist.cdf(0.5 - tau)) <= 0:
        raise ValueError(f"need 0 < τ < 1/2 with G(1/2 - τ) > 0, got τ={tau}")
    if theta is not None and not theta < tau:
        raise ValueError(f"need θ < τ, got θ={theta}, τ={tau}")
    return tau


@dataclass
class TripleStream:
    """Arrays indexed by position i of the emitted section.

    ``xL[i]`` = X^L_i, ``xi[i]`` = ξ_i, ``xR[i]`` = X^R_{i+1}, ``inA[i]`` = 1(i ∈ A).
    ``xi_prev[i]`` = ξ_{i-1}.
    """

    xL: np.ndarray
    xi: np.ndarray
    xR: np.ndarray
    inA: np.ndarray
    xi_prev: np.ndarray
    tau: float


@dataclass
class QuintupleStream(TripleStream):
    zL: np.ndarray = None  # Z^L_i
    zR: np.ndarray = None  # Z^R_{i+1}
    inB: np.ndarray = None
    J: np.ndarray = None  # J_i
    theta: float = 0.0


def _window(dist, length, seed, margin, tau):
    total = length + 2 * margin
    costs = sample_costs(dist, total, seed)  # items 0..total, output items margin..margin+length-1
    s = costs[:-1] + costs[1:]  # s[j] = ξ_j + ξ_{j+1}
    hits = np.flatnonzero(s <= 1.0 - tau)
    lo, hi = margin, margin + length
    # left: need some j+1 <= lo - 1, i.e. ξ_j + ξ_{j+1} small with j + 2 <= lo
    if hits.size == 0 or hits[0] + 2 > lo or hits[-1] < hi:
        raise RuntimeError("no regeneration inside the margins; increase margin")
    return costs, lo, hi


def simulate_triple(dist: CostDistribution, length: int, seed: int, tau=None,
                    margin=DEFAULT_MARGIN) -> TripleStream:
    """Stationary (X^L_i, ξ_i, X^R_{i+1}) with optimal membership of item i."""
    dist.require_nondegenerate()
    tau = _check_tau(dist, tau)
    costs, lo, hi = _window(dist, length, seed, margin, tau)
    xl, xr = x_processes(costs)
    v, w, fv, fw = _forward(costs.tolist())
    a = _backtrack(costs.size + 1, v > w, fv, fw)
    return TripleStream(
        xL=xl[lo:hi], xi=costs[lo:hi], xR=xr[lo + 1:hi + 1], inA=a[lo:hi],
        xi_prev=costs[lo - 1:hi - 1], tau=tau,
    )


def simulate_quintuple(dist: CostDistribution, theta: float, tau=None, length: int = 10**5,
                       seed: int = 0, margin=DEFAULT_MARGIN) -> QuintupleStream:
    """Stationary (Z^L_i, X^L_i, ξ_i, X^R_{i+1}, Z^R_{i+1}) with both memberships."""
    dist.require_nondegenerate()
    theta = check_theta(theta)
    tau = _check_tau(dist, tau, theta if theta > 0 else None)
    costs, lo, hi = _window(dist, length, seed, margin, tau)
    base = dp_solve(costs, check_unique=False)
    a = base.optimal
    pen = penalized_solve(costs, a, theta, with_z=True, base_value=base.value)
    J = np.where(a, -1, 1).astype(np.int8)
    return QuintupleStream(
        xL=base.xL[lo:hi], xi=costs[lo:hi], xR=base.xR[lo + 1:hi + 1], inA=a[lo:hi],
        xi_prev=costs[lo - 1:hi - 1], tau=tau,
        zL=pen.zL[lo:hi], zR=pen.zR[lo + 1:hi + 1], inB=pen.bSet[lo:hi], J=J[lo:hi],
        theta=theta,
    )


def membership_from_x(xL, xi, xR):
    """i ∈ A iff X^L_i > min(ξ_i, X^R_{i+1})."""
    return xL > np.minimum(xi, xR)


def membership_from_z(zL, xi, zR):
    """i ∈ B iff Z^L_i > min(ξ_i, max(Z^R_{i+1}, 0))."""
    return zL > np.minimum(xi, np.maximum(zR, 0.0))


# Monte Carlo for c ------------------------------------------------------------------


def _c_rep(dist, n, seed, index):
    costs = sample_costs(dist, n - 1, derive_seed(seed, "c", index))
    v, w, _, _ = _forward(costs.tolist())
    return (v if v > w else w) / n


def estimate_c_mc(dist: CostDistribution, n: int, reps: int, seed: int = 0, jobs: int = 1):
    """Mean of M_n / n over independent instances; returns (c_hat, stderr)."""
    if n < 1000:
        raise ValueError("estimate_c_mc expects n >= 1000")
    dist.require_nondegenerate()
    vals = np.array(Parallel(n_jobs=jobs)(delayed(_c_rep)(dist, n, seed, r) for r in range(reps)))
    se = float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else float("nan")
    return float(vals.mean()), se


# regenerative cycles ----------------------------------------------------------------


@dataclass
class RegenEstimate:
    theta: float
    deltaHat: float
    epsHat: float
    deltaCI: float
    epsCI: float
    cycles: int
    tau: float
    meanT: float
    batch_delta: np.ndarray
    batch_eps: np.ndarray
    min_W: float

    @property
    def ci95(self):
        return self.deltaCI, self.epsCI


def _cycle_unit(dist, thetas, tau, n_cycles, seed, unit):
    """Simulate ``n_cycles`` i.i.d. cycles; return per-cycle (T, |A△B|_θ..., W_θ...)."""
    rng = make_rng(seed, "regen", unit)
    thr = 1.0 - tau
    T = np.zeros(n_cycles, dtype=np.int64)
    diffs = np.zeros((n_cycles, len(thetas)), dtype=np.int64)
    gaps = np.zeros((n_cycles, len(thetas)))
    origin = None
    done = 0
    while done < n_cycles:
        batch = max(4096, 8 * n_cycles)
        tri = dist.sample(3 * batch, rng).reshape(batch, 3)
        free = dist.sample(2 * batch, rng).reshape(batch, 2)
        hit = (tri[:, 0] + tri[:, 1] < thr) & (tri[:, 1] + tri[:, 2] < thr)
        hit_idx = np.flatnonzero(hit)
        pos = 0
        if origin is None:
            if hit_idx.size == 0:
                continue
            origin = tri[hit_idx[0]]
            pos = hit_idx[0] + 1
        f = 0
        for h in hit_idx[np.searchsorted(hit_idx, pos):]:
            if done >= n_cycles:
                break
            # costs ξ_1 .. ξ_{T-2}
            block = np.concatenate(([origin[2]], free[f], tri[pos:h].ravel(), [tri[h, 0]]))
            f += 1
            t_index = (h - pos) + 2  # t with the hit at triple (3t-2, 3t-1, 3t)
            T[done] = 3 * t_index
            c = block.tolist()
            v, w, fv, fw = _forward(c)
            f_a = v if v > w else w
            a = _backtrack(len(c) + 1, v > w, fv, fw).tolist()
            for k, th in enumerate(thetas):
                if th == 0:
                    continue
                _, b = _penalized_core(c, a, th)
                diffs[done, k] = sum(x != y for x, y in zip(a, b))
                gaps[done, k] = f_a - _benefit_list(c, b)
            done += 1
            origin = tri[h]
            pos = h + 1
        # unconsumed triples after the last hit are discarded: they are
        # independent of everything before, and the next batch continues
        # from the same origin with fresh free draws
    return T, diffs, gaps


def _batch_ci(num, den, batches):
    nb = min(batches, num.size)
    parts_n = np.array([x.sum() for x in np.array_split(num, nb)])
    parts_d = np.array([x.sum() for x in np.array_split(den, nb)])
    ratios = parts_n / parts_d
    if nb < 2:
        return ratios, float("nan")
    half = stats.t.ppf(0.975, nb - 1) * ratios.std(ddof=1) / math.sqrt(nb)
    return ratios, float(half)


def regenerative_sweep(dist: CostDistribution, thetas, tau=None, cycles=10**4, seed=0,
                       jobs=1, batches=N_BATCHES):
    """Cycle estimators of δ(θ), ε(θ) for several θ on common cycles.

    Each cycle starts at an occurrence of the two-short-pairs event on the
    3-grid and ends at the next one; on each block [1, T-1] the optimum A
    and the penalized optimum B are solved exactly.  Estimates are ratios
    Σ|A△B| / Σ(T-1) and Σ(f(A) - f(B)) / Σ(T-1) with batch-means 95% CIs.
    """
    dist.require_nondegenerate()
    thetas = [check_theta(t) for t in thetas]
    tau = _check_tau(dist, tau, max(thetas) if max(thetas) > 0 else None)
    if cycles < 1:
        raise ValueError("need at least one cycle")
    units = math.ceil(cycles / CYCLES_PER_UNIT)
    sizes = [min(CYCLES_PER_UNIT, cycles - u * CYCLES_PER_UNIT) for u in range(units)]
    parts = Parallel(n_jobs=jobs)(
        delayed(_cycle_unit)(dist, thetas, tau, sizes[u], seed, u) for u in range(units)
    )
    T = np.concatenate([p[0] for p in parts])
    diffs = np.concatenate([p[1] for p in parts])
    gaps = np.concatenate([p[2] for p in parts])
    if np.any(T < 6):
        raise InvariantViolation("cycle shorter than 6")
    min_w = gaps.min(axis=0) if gaps.size else np.zeros(len(thetas))
    if np.any(min_w < 0):
        raise InvariantViolation(f"negative benefit gap W(θ) in a cycle: {min_w.min()}")
    items = (T - 1).astype(np.float64)
    out = []
    for k, th in enumerate(thetas):
        bd, dci = _batch_ci(diffs[:, k].astype(np.float64), items, batches)
        be, eci = _batch_ci(gaps[:, k], items, batches)
        out.append(
            RegenEstimate(
                theta=th,
                deltaHat=float(diffs[:, k].sum() / items.sum()),
                epsHat=float(gaps[:, k].sum() / items.sum()),
                deltaCI=dci,
                epsCI=eci,
                cycles=int(T.size),
                tau=tau,
                meanT=float(T.mean()),
                batch_delta=bd,
                batch_eps=be,
                min_W=float(min_w[k]),
            )
        )
    return out


def regenerative_estimate(dist, theta, tau=None, cycles=10**4, seed=0, jobs=1) -> RegenEstimate:
    return regenerative_sweep(dist, [theta], tau, cycles, seed, jobs)[0]


@dataclass
class AlphaEstimate:
    alphaHat: float
    alphaCI: float
    thetas: np.ndarray
    ratios: np.ndarray
    spread: float
    estimates: list


def estimate_alpha(dist, thetas, tau=None, cycles=10**4, seed=0, jobs=1) -> AlphaEstimate:
    """δ̂(θ)/θ per θ and a linear extrapolation of that ratio to θ = 0.

    With two θ values this is Richardson extrapolation; with more it is the
    intercept of a least-squares line.  ``spread`` is max/min of the ratios
    over the three smallest θ.
    """
    thetas = np.array(sorted((float(t) for t in thetas), reverse=True))
    if thetas.size < 2 or np.any(thetas <= 0):
        raise ValueError("need at least two positive θ values")
    ests = regenerative_sweep(dist, thetas.tolist(), tau, cycles, seed, jobs)
    ratios = np.array([e.deltaHat / t for e, t in zip(ests, thetas)])
    if np.any(ratios <= 0):
        raise InvariantViolation("δ̂(θ)/θ must be positive")
    alpha = float(np.polyfit(thetas, ratios, 1)[1])
    per_batch = np.array([e.batch_delta for e in ests]) / thetas[:, None]
    batch_alpha = np.array([np.polyfit(thetas, per_batch[:, b], 1)[1] for b in range(per_batch.shape[1])])
    nb = batch_alpha.size
    ci = float(stats.t.ppf(0.975, nb - 1) * batch_alpha.std(ddof=1) / math.sqrt(nb)) if nb > 1 else float("nan")
    smallest = ratios[-3:]
    return AlphaEstimate(alpha, ci, thetas, ratios, float(smallest.max() / smallest.min()), ests)


# coupling bound ---------------------------------------------------------------------


@dataclass
class CouplingCheck:
    index: int
    sL: float
    kL: int
    qCandidate: bool

    def within_bound(self, theta):
        return abs(self.sL) <= theta * self.kL


def lookback_k(xi_prev_seq, tau):
    """K^L at each position: the smallest k >= 2 with ξ_{i-k} + ξ_{i-k+1} < 1 - τ.

    ``xi_prev_seq`` is the full cost sequence ξ_0, ξ_1, ...; returns -1 where
    no such pair exists in the window.
    """
    c = np.asarray(xi_prev_seq, dtype=np.float64)
    short = np.zeros(c.size, dtype=bool)
    short[:-1] = c[:-1] + c[1:] < 1.0 - tau  # pair starting at j
    idx = np.where(short, np.arange(c.size), -1)
    last = np.maximum.accumulate(idx)
    k = np.full(c.size, -1, dtype=np.int64)
    # for position i we need the latest pair start j <= i - 2
    k[2:] = np.where(last[:-2] >= 0, np.arange(2, c.size) - last[:-2], -1)
    return k


def coupling_bound_check(dist, theta, tau=None, samples=10**4, seed=0, stride=20,
                         margin=DEFAULT_MARGIN):
    """Sample S^L = Z^L - θJ - X^L at spaced positions of a stationary stream.

    Raises :class:`InvariantViolation` if |S^L| > θ K^L anywhere.
    """
    length = samples * stride
    q = simulate_quintuple(dist, theta, tau, length, seed, margin)
    full_costs = sample_costs(dist, length + 2 * margin, seed)
    k_all = lookback_k(full_costs, q.tau)[margin:margin + length]
    s = q.zL - theta * q.J - q.xL
    pos = np.arange(stride // 2, length, stride)[:samples]
    out = []
    bad = []
    for i in pos.tolist():
        k = int(k_all[i])
        if k < 0:
            raise RuntimeError("no short pair to the left of a sample; increase margin")
        sv = float(s[i])
        if theta > 0:
            r = sv / theta
            qc = abs(r - round(r)) <= 1e-9
        else:
            qc = True
        rec = CouplingCheck(i, sv, k, qc)
        if not abs(sv) <= theta * k + 1e-12:
            bad.append(rec)
        out.append(rec)
    if bad:
        raise InvariantViolation(f"{len(bad)} samples violate |S^L| <= θK^L, first {bad[0]}")
    return out


# batch means for correlated streams ---------------------------------------------------


def batch_means(x, batches=N_BATCHES):
    """Mean and 95% half-width of a correlated series by non-overlapping batches."""
    x = np.asarray(x, dtype=np.float64)
    parts = np.array([p.mean() for p in np.array_split(x, batches)])
    half = stats.t.ppf(0.975, batches - 1) * parts.std(ddof=1) / math.sqrt(batches)
    return float(x.mean()), float(half)
