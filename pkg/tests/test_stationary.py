import math

import numpy as np
import pytest
from scipy import stats

from nearopt.chain import dp_solve
from nearopt.near_optimal import penalized_solve
from nearopt.cost_models import CostDistribution, limit_constant_c, sample_costs, stationary_cdf
from nearopt.stationary import (
    InvariantViolation,
    batch_means,
    choose_tau,
    coupling_bound_check,
    estimate_alpha,
    estimate_c_mc,
    lookback_k,
    membership_from_x,
    membership_from_z,
    regenerative_estimate,
    regenerative_sweep,
    simulate_quintuple,
    simulate_triple,
)

EXP1 = CostDistribution.exponential(1.0)


@pytest.fixture(scope="module")
def triple():
    return simulate_triple(EXP1, 10**6, seed=5)


def test_tau_choice():
    assert choose_tau(EXP1) == 0.4
    for d in (CostDistribution.uniform(0.0, 2.0), CostDistribution.exponential(0.2)):
        tau = choose_tau(d)
        assert float(d.cdf(0.5 - tau)) >= 0.05
    # little mass below 1/2 forces a smaller τ
    assert choose_tau(CostDistribution.uniform(0.0, 5.0)) == 0.2
    with pytest.raises(ValueError):
        choose_tau(CostDistribution.uniform(0.3, 5.0))


def test_triple_marginals_follow_F(triple):
    F = lambda x: stationary_cdf(EXP1, x)  # noqa: E731
    assert stats.kstest(triple.xL, F).statistic < 0.002
    assert stats.kstest(triple.xR, F).statistic < 0.002


def test_triple_components_are_uncorrelated(triple):
    s = slice(None, None, 10)  # thin to reduce serial dependence
    for u, v in ((triple.xL, triple.xi), (triple.xi, triple.xR), (triple.xL, triple.xR)):
        assert abs(np.corrcoef(u[s], v[s])[0, 1]) < 0.01


def test_triple_membership_rule(triple):
    assert np.array_equal(membership_from_x(triple.xL, triple.xi, triple.xR), triple.inA)


def test_triple_benefit_rate_matches_c(triple):
    per_item = triple.inA.astype(float)
    per_item[:-1] -= (triple.inA[:-1] & triple.inA[1:]) * triple.xi[:-1]
    m, hw = batch_means(per_item)
    assert abs(m - limit_constant_c(EXP1)) < max(3 * hw, 1e-3)


def test_triple_is_seed_deterministic():
    a = simulate_triple(EXP1, 5000, seed=1)
    b = simulate_triple(EXP1, 5000, seed=1)
    assert np.array_equal(a.xL, b.xL) and np.array_equal(a.inA, b.inA)


def test_quintuple_identities():
    q = simulate_quintuple(EXP1, 0.05, length=10**5, seed=2)
    assert np.array_equal(membership_from_z(q.zL, q.xi, q.zR), q.inB)
    assert np.array_equal(membership_from_x(q.xL, q.xi, q.xR), q.inA)
    # after a short pair ξ_{i-2} + ξ_{i-1} < 1 - τ both recursions restart at 1 - ξ_{i-1}
    regen = np.zeros(q.xi.size, dtype=bool)
    regen[1:] = q.xi_prev[:-1] + q.xi_prev[1:] < 1.0 - q.tau
    assert regen.sum() > 1000
    np.testing.assert_array_equal(q.zL[regen], q.xL[regen] + q.theta * q.J[regen])


def test_quintuple_zero_theta_reduces_to_triple():
    q = simulate_quintuple(EXP1, 0.0, length=10**4, seed=3)
    np.testing.assert_array_equal(q.zL, q.xL)
    np.testing.assert_array_equal(q.inB, q.inA)


def test_c_monte_carlo_agrees_with_quadrature():
    c_hat, se = estimate_c_mc(EXP1, 10**5, reps=8, seed=4)
    assert abs(c_hat - limit_constant_c(EXP1)) < max(4 * se, 5e-4)
    with pytest.raises(ValueError):
        estimate_c_mc(EXP1, 10, reps=2)


def test_c_monte_carlo_jobs_invariant():
    assert estimate_c_mc(EXP1, 2000, reps=4, seed=1) == estimate_c_mc(EXP1, 2000, reps=4, seed=1, jobs=2)


@pytest.fixture(scope="module")
def regen():
    return regenerative_sweep(EXP1, [0.05, 0.02], cycles=20000, seed=9)


def test_regenerative_matches_direct_stream(regen):
    est = regen[0]
    q = simulate_quintuple(EXP1, 0.05, length=10**6, seed=8)
    d_direct, hw = batch_means((q.inA != q.inB).astype(float))
    assert abs(est.deltaHat - d_direct) < 3 * math.hypot(est.deltaCI, hw)


def test_regenerative_structure(regen):
    for est in regen:
        assert est.meanT >= 6
        assert est.min_W >= 0
        assert est.deltaCI > 0 and est.epsCI > 0
        assert est.batch_delta.size == 30
    assert regen[0].deltaHat > regen[1].deltaHat > 0


def test_regenerative_epsilon_matches_direct_stream(regen):
    est = regen[0]
    costs = sample_costs(EXP1, 2 * 10**5, 12)
    base = dp_solve(costs, with_x=False, check_unique=False)
    r = penalized_solve(costs, base.optimal, 0.05, with_z=False, base_value=base.value)
    assert r.epsN == pytest.approx(est.epsHat, rel=0.1)


def test_regenerative_is_deterministic_and_jobs_invariant():
    a = regenerative_estimate(EXP1, 0.05, cycles=4000, seed=1)
    b = regenerative_estimate(EXP1, 0.05, cycles=4000, seed=1, jobs=2)
    assert a.deltaHat == b.deltaHat and a.epsHat == b.epsHat


def test_alpha_estimate_ratios_are_stable():
    res = estimate_alpha(EXP1, [0.08, 0.05, 0.02], cycles=20000, seed=2)
    assert res.alphaHat > 0 and np.isfinite(res.alphaCI)
    assert res.spread < 1.5
    with pytest.raises(ValueError):
        estimate_alpha(EXP1, [0.05])


def test_lookback_k():
    tau = 0.4
    c = np.array([0.1, 0.1, 0.9, 0.9, 0.9, 0.9])
    k = lookback_k(c, tau)
    # pair (0, 1) is short; position i looks back to start j = 0
    assert k[2] == 2 and k[5] == 5
    assert k[0] == -1 and k[1] == -1


def test_coupling_bound_holds():
    recs = coupling_bound_check(EXP1, 0.05, samples=5000, seed=3)
    assert len(recs) == 5000
    assert all(r.within_bound(0.05) or abs(r.sL) <= 0.05 * r.kL + 1e-12 for r in recs)
    frac = np.mean([not r.qCandidate for r in recs])
    assert 0 < frac < 1


def test_invariant_violation_is_assertion():
    assert issubclass(InvariantViolation, AssertionError)


def test_batch_means():
    rng = np.random.default_rng(0)
    x = rng.normal(size=30000)
    m, hw = batch_means(x)
    assert abs(m) < 3 * hw
    assert hw == pytest.approx(1.96 / math.sqrt(30000), rel=0.4)
