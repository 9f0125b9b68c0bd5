import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from orkit.lp import InfeasibleError, UnboundedError, solve_lp


def test_simple_box():
    r = solve_lp([1.0, -1.0], lower=[-2, -3], upper=[4, 5])
    assert r.x.tolist() == [-2.0, 5.0] and r.fun == -7.0


def test_equality_and_inequality():
    # min x + 2y s.t. x + y = 3, x <= 2, y >= 0
    r = solve_lp([1.0, 2.0], A_ub=[[1.0, 0.0]], b_ub=[2.0], A_eq=[[1.0, 1.0]], b_eq=[3.0])
    assert r.fun == pytest.approx(4.0)
    np.testing.assert_allclose(r.x, [2.0, 1.0])


def test_infeasible():
    with pytest.raises(InfeasibleError):
        solve_lp([1.0], A_ub=[[1.0]], b_ub=[-1.0])
    with pytest.raises(InfeasibleError):
        solve_lp([1.0], lower=[2.0], upper=[1.0])


def test_unbounded():
    with pytest.raises(UnboundedError):
        solve_lp([-1.0])


def test_redundant_equalities():
    r = solve_lp([1.0, 1.0], A_eq=[[1.0, 1.0], [2.0, 2.0]], b_eq=[2.0, 4.0])
    assert r.fun == pytest.approx(2.0)


def test_deterministic_vertex():
    args = dict(A_ub=[[1.0, 1.0]], b_ub=[1.0], lower=[0, 0], upper=[1, 1])
    a = solve_lp([-1.0, -1.0], **args)
    b = solve_lp([-1.0, -1.0], **args)
    assert a.x.tobytes() == b.x.tobytes()


@settings(max_examples=150)
@given(st.integers(0, 2**32 - 1))
def test_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    mu, me = int(rng.integers(0, 5)), int(rng.integers(0, 3))
    c = rng.normal(size=n)
    Au, bu = rng.normal(size=(mu, n)), rng.normal(size=mu) + 1
    Ae, be = rng.normal(size=(me, n)), rng.normal(size=me)
    lo = np.where(rng.random(n) < 0.3, -np.inf, -rng.random(n) * 3)
    hi = np.where(rng.random(n) < 0.3, np.inf, rng.random(n) * 3)
    ref = linprog(
        c,
        A_ub=Au if mu else None,
        b_ub=bu if mu else None,
        A_eq=Ae if me else None,
        b_eq=be if me else None,
        bounds=list(zip(lo, hi)),
        method="highs",
    )
    if ref.status == 0:
        r = solve_lp(c, Au, bu, Ae, be, lo, hi)
        assert r.fun == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)
        assert np.all(r.x >= lo - 1e-9) and np.all(r.x <= hi + 1e-9)
        if mu:
            assert np.all(Au @ r.x <= bu + 1e-7)
        if me:
            np.testing.assert_allclose(Ae @ r.x, be, atol=1e-7)
    elif ref.status == 2:
        with pytest.raises(InfeasibleError):
            solve_lp(c, Au, bu, Ae, be, lo, hi)
    elif ref.status == 3:
        with pytest.raises(UnboundedError):
            solve_lp(c, Au, bu, Ae, be, lo, hi)
