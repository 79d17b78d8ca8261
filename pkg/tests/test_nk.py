import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nearopt.nk import (
    NKInstance,
    energy,
    excursions,
    nk_brute_force,
    nk_generate,
    nk_penalized_solve,
    nk_solve,
    nk_table1,
    window_indices,
)


def test_generate_shapes_and_determinism():
    inst = nk_generate(12, 3, seed=1)
    assert inst.weights.shape == (9, 16)
    assert np.all(inst.weights >= 0)
    assert np.array_equal(inst.weights, nk_generate(12, 3, seed=1).weights)
    for N, K in ((3, 3), (10, 1)):
        with pytest.raises(ValueError):
            nk_generate(N, K, seed=0)


def test_window_indices_msb_first():
    x = np.array([1, 0, 1, 1])
    assert window_indices(x, 2).tolist() == [0b101, 0b011]


def test_energy_by_hand():
    w = np.arange(8, dtype=float).reshape(1, 8).repeat(2, axis=0)
    inst = NKInstance(4, 2, w)
    assert energy(inst, [1, 0, 1, 1]) == 5.0 + 3.0


def test_solve_matches_brute_force():
    for seed in range(60):
        N = 8 + seed % 7
        K = 2 + seed % 2
        inst = nk_generate(N, K, seed)
        x, h = nk_solve(inst)
        best, xb, count = nk_brute_force(inst)
        assert h == best
        assert energy(inst, x) == h
        if count == 1:
            assert np.array_equal(x, xb)


def test_penalized_matches_brute_force():
    for seed in range(40):
        inst = nk_generate(12, 3, 100 + seed)
        x, h = nk_solve(inst)
        for theta in (0.05, 0.3, 1.0):
            r = nk_penalized_solve(inst, x, theta, h)
            best, _, _ = nk_brute_force(inst, theta, x)
            # recompute the penalized objective of y directly
            match = window_indices(r.y, 3) == window_indices(x, 3)
            assert r.hY + theta * match.sum() == pytest.approx(best, abs=1e-12)
            assert r.epsN >= -1e-15


def test_zero_theta_is_identity():
    inst = nk_generate(30, 3, 7)
    x, h = nk_solve(inst)
    r = nk_penalized_solve(inst, x, 0.0, h)
    assert np.array_equal(r.y, x) and r.deltaN == 0 and r.epsN == 0


def test_excursions():
    xs = np.zeros(10, dtype=np.uint8)
    y = xs.copy()
    y[4] = 1
    # K = 2: windows 2, 3, 4 contain bit 4
    assert excursions(y, xs, 2).tolist() == [3]
    y[9] = 1
    assert excursions(y, xs, 2).tolist() == [3, 1]
    assert excursions(xs, xs, 2).size == 0


def test_table_rows_and_determinism():
    rows, c = nk_table1(3, 300, 10, [0.01, 0.05], seed=2)
    rows2, c2 = nk_table1(3, 300, 10, [0.01, 0.05], seed=2, jobs=2)
    assert rows == rows2 and c == c2
    assert 0.2 < c < 0.45
    assert rows[0]["delta"] < rows[1]["delta"]
    for r in rows:
        assert r["eps_over_delta_sq"] == pytest.approx(r["eps"] / r["delta"] ** 2)
        assert r["mean_L"] >= 1


def test_lagrange_duality_bound():
    # exact minimizers satisfy ε(θ) <= θ δ(θ)
    rows, _ = nk_table1(3, 500, 20, [0.01, 0.02, 0.05], seed=3)
    for r in rows:
        assert r["eps"] <= r["theta"] * r["delta"] + 1e-15


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(6, 12), st.sampled_from([2, 3]), st.floats(0.0, 0.5))
def test_property_penalized_optimality(seed, N, K, theta):
    inst = nk_generate(N, K, seed)
    x, h = nk_solve(inst)
    r = nk_penalized_solve(inst, x, theta, h)
    best, _, _ = nk_brute_force(inst, theta, x)
    match = window_indices(r.y, K) == window_indices(x, K)
    assert r.hY + theta * match.sum() == pytest.approx(best, abs=1e-12)
