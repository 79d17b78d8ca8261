"""NK landscapes with nearest-neighbour windows.

H_N(x) = sum_{i=1}^{N-K} W_i(x_i, ..., x_{i+K}) with i.i.d. exponential(1)
weights.  A window is indexed by the integer whose most significant bit is
x_i.  Sums are accumulated right to left (W_1 + (W_2 + (... + W_{N-K}))) in
both the DP and the enumeration oracle, so their minima compare exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator

from ._validation import check_theta
from .seeding import derive_seed, make_rng

NK_BRUTE_MAX_N = 22
_INSTANCE_CHUNK = 50


@dataclass(frozen=True)
class NKInstance:
    N: int
    K: int
    weights: np.ndarray = field(repr=False)  # shape (N-K, 2^(K+1))

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if self.K < 1 or self.N <= self.K:
            raise ValueError(f"need N > K >= 1, got N={self.N}, K={self.K}")
        if w.shape != (self.N - self.K, 1 << (self.K + 1)):
            raise ValueError(f"weight table has shape {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


@dataclass
class NKResult:
    theta: float
    xStar: np.ndarray
    hStar: float
    y: np.ndarray
    hY: float
    deltaN: float
    epsN: float
    excursionLengths: np.ndarray

    @property
    def meanL(self):
        return float(self.excursionLengths.mean()) if self.excursionLengths.size else float("nan")


def nk_generate(N: int, K: int, seed: int) -> NKInstance:
    if not (isinstance(N, (int, np.integer)) and isinstance(K, (int, np.integer))):
        raise ValueError("N and K must be integers")
    if K < 2 or N <= K:
        raise ValueError(f"need N > K >= 2, got N={N}, K={K}")
    w = make_rng(seed).exponential(1.0, size=(N - K, 1 << (K + 1)))
    return NKInstance(int(N), int(K), w)


def window_indices(x, K):
    """Integer index of every (K+1)-window of the bit string(s) ``x``."""
    x = np.asarray(x, dtype=np.int64)
    n_win = x.shape[-1] - K
    idx = np.zeros(x.shape[:-1] + (n_win,), dtype=np.int64)
    for t in range(K + 1):
        idx = (idx << 1) | x[..., t:t + n_win]
    return idx


def energy(instance: NKInstance, x) -> float:
    idx = window_indices(x, instance.K)
    vals = instance.weights[np.arange(idx.size), idx]
    total = 0.0
    for v in vals[::-1].tolist():
        total = v + total
    return total


def _dp_batch(weights, K):
    """Minimize for a batch of weight tables of shape (B, N-K, 2^(K+1)).

    Returns (values (B,), strings (B, N) of uint8), lexicographically
    smallest minimizers.
    """
    B, m, _ = weights.shape
    S = 1 << K
    mask = S - 1
    nxt = np.arange(2 * S).reshape(S, 2) & mask
    R = np.empty((m + 1, B, S))
    R[m] = 0.0
    for i in range(m - 1, -1, -1):
        cand = weights[:, i, :].reshape(B, S, 2) + R[i + 1][:, nxt]
        R[i] = cand.min(axis=2)
    s = np.argmin(R[0], axis=1)
    values = R[0][np.arange(B), s]
    N = m + K
    x = np.zeros((B, N), dtype=np.uint8)
    for t in range(K):
        x[:, t] = (s >> (K - 1 - t)) & 1
    rows = np.arange(B)
    for i in range(m):
        base = s << 1
        c0 = weights[rows, i, base] + R[i + 1][rows, base & mask]
        b = (c0 != R[i][rows, s]).astype(np.int64)
        x[:, i + K] = b
        s = (base | b) & mask
    return values, x


def nk_solve(instance: NKInstance):
    """Exact minimizer of H_N; returns (xStar, hStar)."""
    vals, x = _dp_batch(instance.weights[None], instance.K)
    return x[0], float(vals[0])


def _penalized_weights(weights, x_star, K, theta):
    """W_i(b) + θ·1(b equals the i-th window of x_star); batch aware."""
    idx = window_indices(x_star, K)
    match = np.zeros(weights.shape, dtype=bool)
    np.put_along_axis(match, idx[..., None], True, axis=-1)
    return weights + np.where(match, theta, 0.0)


def excursions(y, x_star, K):
    """Lengths of maximal runs of windows where y and x_star differ."""
    wy = window_indices(y, K)
    wx = window_indices(x_star, K)
    diff = np.concatenate(([0], (wy != wx).astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(diff))
    return edges[1::2] - edges[::2]


def nk_penalized_solve(instance: NKInstance, xStar, theta: float, hStar=None) -> NKResult:
    """Minimize H_N(y) + θ·#{i: window_i(y) = window_i(xStar)} exactly."""
    theta = check_theta(theta)
    x_star = np.asarray(xStar, dtype=np.uint8)
    h_star = energy(instance, x_star) if hStar is None else hStar
    w = _penalized_weights(instance.weights, x_star, instance.K, theta)
    _, y = _dp_batch(w[None], instance.K)
    return _summarize(instance.weights, instance.K, theta, x_star, h_star, y[0])


def _summarize(weights, K, theta, x_star, h_star, y):
    N = x_star.size
    hy = _energy_from_table(weights, K, y)
    exc = excursions(y, x_star, K)
    return NKResult(
        theta=theta, xStar=x_star, hStar=h_star, y=y, hY=hy,
        deltaN=float(exc.sum()) / N, epsN=(hy - h_star) / N, excursionLengths=exc,
    )


def _energy_from_table(weights, K, x):
    idx = window_indices(x, K)
    vals = weights[np.arange(idx.size), idx]
    total = 0.0
    for v in vals[::-1].tolist():
        total = v + total
    return total


def nk_brute_force(instance: NKInstance, theta=0.0, x_star=None):
    """Enumerate all 2^N strings; returns (min value, lexicographically smallest minimizer, count)."""
    N, K = instance.N, instance.K
    if N > NK_BRUTE_MAX_N:
        raise ValueError(f"brute force limited to N <= {NK_BRUTE_MAX_N}")
    w = instance.weights
    if theta:
        w = _penalized_weights(w, np.asarray(x_star, dtype=np.uint8), K, theta)
    shifts = np.arange(N - 1, -1, -1, dtype=np.int64)
    best = np.inf
    best_code = -1
    count = 0
    total = 1 << N
    chunk = 1 << 16
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = (codes[:, None] >> shifts) & 1
        idx = window_indices(bits, K)
        val = np.zeros(codes.size)
        for i in range(N - K - 1, -1, -1):
            val = w[i, idx[:, i]] + val
        m = val.min()
        if m < best:
            best = m
            hits = np.flatnonzero(val == m)
            best_code = int(codes[hits[0]])
            count = hits.size
        elif m == best:
            count += int(np.count_nonzero(val == m))
    x = ((best_code >> shifts) & 1).astype(np.uint8)
    return float(best), x, count


# θ sweep tables -----------------------------------------------------------------


def _table_chunk(K, N, thetas, seed, indices):
    weights = np.stack([nk_generate(N, K, derive_seed(seed, "nk", r)).weights for r in indices])
    h, xs = _dp_batch(weights, K)
    out = {"h": h, "delta": np.zeros((len(indices), len(thetas))),
           "eps": np.zeros((len(indices), len(thetas))),
           "exc_total": np.zeros((len(indices), len(thetas)), dtype=np.int64),
           "exc_count": np.zeros((len(indices), len(thetas)), dtype=np.int64)}
    for k, th in enumerate(thetas):
        if th == 0:
            continue
        pw = _penalized_weights(weights, xs, K, th)
        _, ys = _dp_batch(pw, K)
        for b in range(len(indices)):
            res = _summarize(weights[b], K, th, xs[b], float(h[b]), ys[b])
            out["delta"][b, k] = res.deltaN
            out["eps"][b, k] = res.epsN
            out["exc_total"][b, k] = res.excursionLengths.sum()
            out["exc_count"][b, k] = res.excursionLengths.size
    return out


def nk_table1(K: int, N: int, reps: int, thetas, seed: int = 0, jobs: int = 1):
    """Per-θ rows of δ, ε, ε/δ² and mean excursion length over ``reps`` instances.

    The same instances serve every θ.

    Returns ``(rows, c_hat)`` where c_hat is the mean of H_N(x^N)/N.  δ and ε
    are averaged per instance; E L is the pooled mean excursion length.
    """
    thetas = [check_theta(t) for t in thetas]
    chunks = [list(range(s, min(s + _INSTANCE_CHUNK, reps))) for s in range(0, reps, _INSTANCE_CHUNK)]
    parts = Parallel(n_jobs=jobs)(delayed(_table_chunk)(K, N, thetas, seed, c) for c in chunks)
    h = np.concatenate([p["h"] for p in parts])
    delta = np.concatenate([p["delta"] for p in parts])
    eps = np.concatenate([p["eps"] for p in parts])
    tot = np.concatenate([p["exc_total"] for p in parts]).sum(axis=0)
    cnt = np.concatenate([p["exc_count"] for p in parts]).sum(axis=0)
    rows = []
    for k, th in enumerate(thetas):
        d = float(delta[:, k].mean())
        e = float(eps[:, k].mean())
        rows.append(dict(
            theta=th, delta=d, eps=e,
            eps_over_delta_sq=e / d**2 if d > 0 else float("nan"),
            mean_L=float(tot[k] / cnt[k]) if cnt[k] else float("nan"),
            se_delta=_se(delta[:, k]), se_eps=_se(eps[:, k]),
            reps=reps, N=N, K=K, seed=seed,
        ))
    return rows, float(h.mean() / N)


def _se(x):
    return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")


class NKSolver(BaseEstimator):
    """Estimator wrapper: ``fit`` takes a weight table of shape (N-K, 2^(K+1)).

    With ``theta > 0`` it also solves the penalized problem; ``predict``
    returns the penalized string (or the minimizer when ``theta == 0``).
    """

    def __init__(self, theta=0.0):
        self.theta = theta

    def fit(self, X, y=None):
        w = np.asarray(X, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError("expected a 2-D weight table")
        K = int(round(math.log2(w.shape[1]))) - 1
        if (1 << (K + 1)) != w.shape[1]:
            raise ValueError("weight table width must be a power of two")
        inst = NKInstance(w.shape[0] + K, K, w)
        self.x_star_, self.h_star_ = nk_solve(inst)
        self.result_ = nk_penalized_solve(inst, self.x_star_, self.theta, self.h_star_)
        return self

    def predict(self, X=None):
        if not hasattr(self, "result_"):
            raise AttributeError("NKSolver is not fitted yet")
        return self.result_.y.copy()
