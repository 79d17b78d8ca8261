import numpy as np
import pytest
from sklearn.base import clone

from nearopt.chain import ChainOptimizer, dp_solve
from nearopt.nk import NKSolver, nk_generate, nk_solve
from nearopt.scaling import ScalingExponentRegressor, fit_scaling_exponent
from nearopt.seeding import derive_seed, make_rng


def test_fit_recovers_power_law():
    d = np.array([0.005, 0.01, 0.02, 0.05, 0.1])
    res = fit_scaling_exponent(zip(d, 0.3 * d**2))
    assert res.slope == pytest.approx(2.0, abs=1e-12)
    assert res.intercept == pytest.approx(np.log(0.3), abs=1e-12)
    assert res.r2 == pytest.approx(1.0)


def test_fit_drops_nonpositive_rows_and_guards():
    rows = [(0.01, 1e-4), (0.0, 0.0), (0.02, 4e-4), (0.04, 1.6e-3)]
    assert fit_scaling_exponent(rows).slope == pytest.approx(2.0)
    with pytest.raises(ValueError):
        fit_scaling_exponent([(0.01, 1e-4), (0.02, 4e-4)])
    with pytest.raises(ValueError):
        fit_scaling_exponent([(0.01, 1e-4)] * 3)


def test_regressor():
    d = np.array([[0.01], [0.02], [0.04], [0.08]])
    y = 0.5 * d[:, 0] ** 3
    est = ScalingExponentRegressor().fit(d, y)
    assert est.slope_ == pytest.approx(3.0)
    np.testing.assert_allclose(est.predict(d), y)
    assert est.score(d, y) == pytest.approx(1.0)
    assert clone(est).get_params() == {}


def test_chain_optimizer():
    est = ChainOptimizer()
    assert clone(est).get_params() == {"method": "dp"}
    est.fit(np.array([0.3, 0.4]))
    assert est.predict().tolist() == [True, True, True]
    assert est.value_ == pytest.approx(2.3)
    brute = ChainOptimizer(method="brute").fit(np.array([2.0, 2.0]))
    assert brute.predict().tolist() == dp_solve([2.0, 2.0]).optimal.tolist()
    with pytest.raises(ValueError):
        ChainOptimizer(method="greedy").fit(np.array([0.3]))


def test_nk_solver():
    inst = nk_generate(40, 3, 5)
    est = NKSolver(theta=0.0).fit(inst.weights)
    x, _ = nk_solve(inst)
    assert np.array_equal(est.predict(), x)
    assert clone(NKSolver(theta=0.1)).get_params() == {"theta": 0.1}
    with pytest.raises(AttributeError):
        NKSolver().predict()


def test_seeds():
    assert derive_seed(1, "a", 0) == derive_seed(1, "a", 0)
    assert len({derive_seed(1, "a", i) for i in range(100)}) == 100
    assert derive_seed(1, "a") != derive_seed(1, "b")
    assert make_rng(3, "x").random() == make_rng(3, "x").random()
