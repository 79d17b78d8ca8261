"""Edge-cost distributions, the induced stationary law F and the limit constant c.

Also holds the threshold formulas for the i.i.d. toy model in which the
optimum keeps exactly the items with ``X_i > 1``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .seeding import make_rng

BISECTION_TOL = 1e-10
_QUAD_TOL = 1e-13


@dataclass(frozen=True)
class CostDistribution:
    """Law G of the positive edge costs.

    ``kind`` is ``"exp"`` (``params=(rate,)``), ``"uniform"`` (``params=(lo, hi)``)
    or ``"empirical"`` (``table`` holds sorted positive samples; the CDF
    interpolates linearly through ``(0, 0), (s_1, 1/m), ..., (s_m, 1)``).
    """

    kind: str
    params: tuple = ()
    table: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind == "exp":
            (rate,) = self.params
            if not (rate > 0 and math.isfinite(rate)):
                raise ValueError(f"exponential rate must be > 0, got {rate}")
        elif self.kind == "uniform":
            lo, hi = self.params
            if not (0 <= lo < hi < math.inf):
                raise ValueError(f"uniform needs 0 <= lo < hi, got ({lo}, {hi})")
        elif self.kind == "empirical":
            tab = np.sort(np.asarray(self.table, dtype=np.float64))
            if tab.ndim != 1 or tab.size < 2:
                raise ValueError("empirical distribution needs at least two samples")
            if not np.all(np.isfinite(tab)) or tab[0] <= 0:
                raise ValueError("empirical samples must be finite and positive")
            if np.any(np.diff(tab) <= 0):
                raise ValueError("empirical samples must be distinct")
            object.__setattr__(self, "table", tab)
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    # constructors
    @classmethod
    def exponential(cls, rate=1.0):
        return cls("exp", (float(rate),))

    @classmethod
    def uniform(cls, lo=0.0, hi=1.0):
        return cls("uniform", (float(lo), float(hi)))

    @classmethod
    def empirical(cls, samples):
        return cls("empirical", (), np.asarray(samples, dtype=np.float64))

    def __str__(self):
        if self.kind == "exp":
            return f"exp:{self.params[0]:g}"
        if self.kind == "uniform":
            return f"uniform:{self.params[0]:g}:{self.params[1]:g}"
        return f"empirical[{self.table.size}]"

    # knots of the piecewise-linear empirical CDF
    def _knots(self):
        m = self.table.size
        xs = np.concatenate(([0.0], self.table))
        ps = np.arange(m + 1, dtype=np.float64) / m
        return xs, ps

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "exp":
            return np.where(x > 0, -np.expm1(-self.params[0] * np.maximum(x, 0.0)), 0.0)
        if self.kind == "uniform":
            lo, hi = self.params
            return np.clip((x - lo) / (hi - lo), 0.0, 1.0)
        xs, ps = self._knots()
        return np.interp(x, xs, ps, left=0.0, right=1.0)

    def sf(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "exp":
            return np.where(x > 0, np.exp(-self.params[0] * np.maximum(x, 0.0)), 1.0)
        return 1.0 - self.cdf(x)

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "exp":
            lam = self.params[0]
            return np.where(x >= 0, lam * np.exp(-lam * np.maximum(x, 0.0)), 0.0)
        if self.kind == "uniform":
            lo, hi = self.params
            return np.where((x >= lo) & (x <= hi), 1.0 / (hi - lo), 0.0)
        xs, ps = self._knots()
        slopes = np.diff(ps) / np.diff(xs)
        idx = np.searchsorted(xs, x, side="right") - 1
        inside = (idx >= 0) & (idx < slopes.size)
        return np.where(inside, slopes[np.clip(idx, 0, slopes.size - 1)], 0.0)

    def breakpoints(self):
        """Points where the density may be discontinuous."""
        if self.kind == "exp":
            return np.array([0.0])
        if self.kind == "uniform":
            return np.array(self.params, dtype=np.float64)
        return self._knots()[0]

    def sample(self, count, rng):
        if self.kind == "exp":
            return rng.exponential(1.0 / self.params[0], size=count)
        if self.kind == "uniform":
            lo, hi = self.params
            out = rng.uniform(lo, hi, size=count)
            # keep strictly positive costs when lo == 0
            if lo == 0.0:
                out[out == 0.0] = np.finfo(float).tiny
            return out
        xs, ps = self._knots()
        u = rng.random(count)
        out = np.interp(u, ps, xs)
        out[out == 0.0] = np.finfo(float).tiny
        return out

    def check_assumptions(self):
        """Return a list of human-readable flags for the regularity conditions.

        An empty list means the density is bounded, continuous near 1/2 and
        positive at 1/2. Flags never reject the distribution.
        """
        flags = []
        if self.kind != "exp":
            flags.append("density is not continuous everywhere")
        if float(self.pdf(0.5)) <= 0:
            flags.append("density vanishes at 1/2")
        g_half = float(self.cdf(0.5))
        if not 0.0 < g_half < 1.0:
            flags.append("G(1/2) is not strictly between 0 and 1")
        return flags

    def require_nondegenerate(self):
        g_half = float(self.cdf(0.5))
        if not 0.0 < g_half < 1.0:
            raise ValueError(
                f"{self}: need 0 < G(1/2) < 1 for the asymptotic experiments, got {g_half}"
            )


def parse_distribution(spec: str) -> CostDistribution:
    """Parse ``exp:λ``, ``uniform:lo:hi`` or ``empirical:<path>``."""
    kind, _, rest = spec.strip().partition(":")
    kind = kind.lower()
    try:
        if kind in ("exp", "exponential"):
            return CostDistribution.exponential(float(rest) if rest else 1.0)
        if kind == "uniform":
            lo, hi = (float(v) for v in rest.split(":"))
            return CostDistribution.uniform(lo, hi)
        if kind == "empirical":
            values = [float(tok) for tok in Path(rest).read_text().split()]
            return CostDistribution.empirical(values)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad distribution spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown distribution spec {spec!r}")


def sample_costs(dist: CostDistribution, count: int, seed: int) -> np.ndarray:
    """``count`` i.i.d. costs; bit-identical for identical arguments."""
    if int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count!r}")
    return dist.sample(int(count), make_rng(seed))


def stationary_cdf(dist: CostDistribution, x):
    """Stationary law of the value-difference process X on [0, 1].

    F(x) = Gbar(1-x) G(x) / (1 - Gbar(x) Gbar(1-x)), the unique solution of
    F(x) = Gbar(1-x) (1 - F(1-x)).
    """
    x = np.asarray(x, dtype=np.float64)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("stationary_cdf is defined on [0, 1]")
    gbar_x = dist.sf(x)
    gbar_1mx = dist.sf(1.0 - x)
    denom = 1.0 - gbar_x * gbar_1mx
    if np.any(denom <= 1e-300):
        raise ValueError(f"{dist}: degenerate distribution, Gbar(x)Gbar(1-x) = 1")
    out = gbar_1mx * dist.cdf(x) / denom
    return out if out.ndim else float(out)


def exponential_stationary_cdf(rate, x):
    """Closed form (e^{λx} - 1) / (e^λ - 1)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.expm1(rate * x) / np.expm1(rate)
    return out if out.ndim else float(out)


def _quad_points(dist):
    pts = dist.breakpoints()
    pts = np.concatenate((pts, 1.0 - pts))
    pts = np.unique(pts[(pts > 0) & (pts < 1)])
    return pts


def _piecewise_quad(fn, points):
    edges = np.concatenate(([0.0], points, [1.0]))
    total = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, e = integrate.quad(fn, a, b, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200)
            except integrate.IntegrationWarning as exc:
                raise RuntimeError(f"quadrature did not converge on [{a}, {b}]: {exc}") from exc
        total += val
        err += e
    if err > 1e-9:
        raise RuntimeError(f"quadrature error estimate {err:.2e} exceeds tolerance")
    return total


def limit_constant_c(dist: CostDistribution) -> float:
    """c = 1/2 + P/2 - E with P = ∫_0^1 g (1-F)^2 and E = ∫_0^1 u g (1-F)^2.

    X^L and X^R are independent with law F and independent of the cost, so
    P(ξ < min(X^L, X^R)) reduces to a one-dimensional integral over (0, 1).
    """
    dist.require_nondegenerate()

    def weight(u):
        return float(dist.pdf(u)) * (1.0 - stationary_cdf(dist, u)) ** 2

    pts = _quad_points(dist)
    p = _piecewise_quad(weight, pts)
    e = _piecewise_quad(lambda u: u * weight(u), pts)
    return 0.5 + 0.5 * p - e


def exponential_limit_constant(rate: float) -> float:
    """(1 - e^{-λ})^{-1} - 1/λ, with the series 1/2 + λ/12 - λ^3/720 near 0."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    if rate < 1e-3:
        return 0.5 + rate / 12.0 - rate**3 / 720.0
    return -1.0 / math.expm1(-rate) - 1.0 / rate


# i.i.d. toy model -----------------------------------------------------------


def _as_density(h):
    if isinstance(h, CostDistribution):
        return (lambda x: float(h.pdf(x))), list(h.breakpoints())
    return h, []


def iid_threshold_epsilon(h, delta: float):
    """Return ``(a(δ), ε(δ))`` for the threshold model with density ``h``.

    ``a`` solves δ = ∫_{1-a}^{1+a} h by bisection; ε = ∫_{1-a}^{1+a} |x-1| h.
    ``h`` may be a callable or a :class:`CostDistribution`.
    """
    dens, pts = _as_density(h)
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    if delta == 0.0:
        return 0.0, 0.0

    def mass(a):
        return _interval_integral(dens, pts, 1.0 - a, 1.0 + a, weight=None)

    hi = 1.0
    while mass(hi) < delta:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError(f"delta={delta} exceeds the mass available around 1")
    lo = 0.0
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if mass(mid) < delta:
            lo = mid
        else:
            hi = mid
    a = 0.5 * (lo + hi)
    eps = _interval_integral(dens, pts, 1.0 - a, 1.0 + a, weight=lambda x: abs(x - 1.0))
    return a, eps


def _interval_integral(dens, pts, a, b, weight):
    inner = sorted(p for p in set(pts) | {1.0} if a < p < b)
    edges = [a, *inner, b]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        fn = dens if weight is None else (lambda x: weight(x) * dens(x))
        total += integrate.quad(fn, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    return total


def simulate_iid_epsilon(dist: CostDistribution, n: int, delta: float, seed: int):
    """Finite-n gap of the toy model: flip the ⌈δn⌉ items closest to the threshold.

    Returns ``(eps_n, flipped)`` with eps_n = n^{-1}(M_n - M'_n).
    """
    x = sample_costs(dist, n, seed)
    m = math.ceil(delta * n - 1e-9)
    if m == 0:
        return 0.0, 0
    dist_to_one = np.abs(x - 1.0)
    part = np.partition(dist_to_one, m - 1)[:m]
    return float(part.sum()) / n, m
