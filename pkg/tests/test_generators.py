import io
import math

import numpy as np
import pytest

from orkit import generators as gen
from orkit import nlexpr as nl
from orkit.model import RowSense, to_column_form
from orkit.writers import write_lp


def test_pmedian_counts():
    m = gen.gen_pmedian(gen.PMedianConfig(L=40, M=4, N=7))
    assert m.num_vars == 7 * 40 + 40
    assert m.num_rows == 7 * 40 + 7 + 1
    assert m.names[0] == "x_1_1" and m.names[7 * 40] == "y_1"
    assert set(m.lower) == {0.0} and set(m.upper) == {1.0}


def test_pmedian_smallest():
    cfg = gen.PMedianConfig(L=1, M=1, N=1, seed=5)
    m = gen.gen_pmedian(cfg)
    assert m.num_rows == 3
    c1 = gen.make_rng(5).uniform(1.0, 1.0, size=1)[0]
    assert m.objective.coeffs == [abs(c1 - 1)]


def test_pmedian_objective_uses_seeded_locations():
    cfg = gen.PMedianConfig(L=30, M=3, N=4, seed=99)
    C = gen.make_rng(99).uniform(1.0, 30.0, size=4)
    m = gen.gen_pmedian(cfg)
    expect = [abs(C[i] - j) for i in range(4) for j in range(1, 31)]
    assert m.objective.vars == list(range(120))
    np.testing.assert_array_equal(m.objective.coeffs, expect)
    assert np.all((C >= 1.0) & (C <= 30.0))


def test_pmedian_rows():
    L, N, M = 6, 3, 2
    cf = to_column_form(gen.gen_pmedian(gen.PMedianConfig(L=L, M=M, N=N)))
    A = cf.A.to_dense()
    # linking rows
    for i in range(N):
        for j in range(L):
            r = i * L + j
            assert A[r, i * L + j] == 1 and A[r, N * L + j] == -1 and np.count_nonzero(A[r]) == 2
            assert cf.senses[r] is RowSense.LE and cf.rhs[r] == 0
    for i in range(N):
        r = N * L + i
        assert A[r, i * L : (i + 1) * L].tolist() == [1.0] * L and cf.rhs[r] == 1
    assert A[-1, N * L :].tolist() == [1.0] * L and cf.rhs[-1] == M


def test_pmedian_seed_changes_objective():
    a = gen.gen_pmedian(gen.PMedianConfig(L=20, M=2, N=3, seed=1))
    b = gen.gen_pmedian(gen.PMedianConfig(L=20, M=2, N=3, seed=2))
    assert a.objective.coeffs != b.objective.coeffs


@pytest.mark.parametrize("kw", [dict(L=5, M=6), dict(L=5, M=0), dict(L=5, M=2, N=0)])
def test_pmedian_invalid(kw):
    with pytest.raises(ValueError):
        gen.PMedianConfig(**kw)


def test_cont5_2_small():
    cfg = gen.Cont52Config(N=2)
    assert cfg.M == 2 and cfg.dx == 0.5 and cfg.dt == 0.5
    np.testing.assert_allclose(cfg.g, [0.5, 0.375, 0.0])
    m = gen.gen_cont5_2(cfg)
    assert m.num_rows == 2 * 1 + 2 * 2 == 6
    assert m.num_vars == 3 * 3 + 2
    assert all(r.sense is RowSense.EQ for r in m.rows)
    for j in range(3):
        assert m.lower[j] == m.upper[j] == 0.0
    assert m.lower[-2:] == [-1.0, -1.0] and m.upper[-2:] == [1.0, 1.0]


def test_cont5_2_stencil_coefficients():
    N = 4
    cfg = gen.Cont52Config(N=N)
    m = gen.gen_cont5_2(cfg)
    A = to_column_form(m).A.to_dense()
    k = 1 / (2 * cfg.dx**2)

    def y(i, j):
        return i * (N + 1) + j

    row = A[0]  # i = 0, j = 1
    assert row[y(1, 1)] == pytest.approx(1 / cfg.dt + 2 * k)
    assert row[y(0, 1)] == pytest.approx(-1 / cfg.dt + 2 * k)
    for c in (y(0, 0), y(0, 2), y(1, 0), y(1, 2)):
        assert row[c] == pytest.approx(-k)
    assert np.count_nonzero(row) == 6
    # duplicate terms kept in the row itself
    assert len(m.rows[0].expr.vars) == 8
    right = A[-1]  # i = M, right boundary with control
    assert right[y(N, N)] == pytest.approx(3 + 2 * cfg.dx)
    assert right[-1] == pytest.approx(-2 * cfg.dx)


def test_cont5_2_250_builds_and_writes():
    cfg = gen.Cont52Config(N=250)
    a, b = io.BytesIO(), io.BytesIO()
    write_lp(gen.gen_cont5_2(cfg), a)
    write_lp(gen.gen_cont5_2(cfg), b)
    assert a.getvalue() == b.getvalue() and len(a.getvalue()) > 0


def test_clnlbeam_tiny():
    m = gen.gen_clnlbeam(gen.ClnlbeamConfig(1))
    assert m.num_vars == 6 and m.num_constraints == 2
    assert m.lower[:2] == [-1.0, -1.0] and m.upper[2:4] == [0.05, 0.05]
    assert m.lower[4] == -math.inf and m.upper[4] == math.inf
    np.testing.assert_array_equal(nl.evaluate_constraints(m, np.zeros(6)), 0.0)


def test_clnlbeam_family_keys():
    n = 3
    m = gen.gen_clnlbeam(gen.ClnlbeamConfig(n))
    keys = [nl.canonical_key(c) for c in m.constraints]
    assert len(set(keys[:n])) == 1 and len(set(keys[n:])) == 1
    assert keys[0] != keys[n]


@pytest.mark.parametrize("n", [1, 2, 4, 7])
def test_structure_formulas(n):
    plan = nl.compile_jacobian(gen.gen_clnlbeam(gen.ClnlbeamConfig(n)))
    assert plan.nnz == 8 * n and plan.num_classes == 2
    if n >= 2:
        m = gen.gen_cont5_1(gen.Cont51Config(n))
        assert m.num_constraints == n * (n + 1)
        assert m.num_vars == (n + 1) ** 2 + n
        assert nl.compile_jacobian(m).nnz == 6 * n * (n - 1) + 3 * n + 4 * n


def test_cont5_1_constants():
    cfg = gen.Cont51Config(4)
    assert cfg.a == pytest.approx(8 * 16 / math.pi**2)
    assert cfg.c == pytest.approx(8 / math.pi)
    with pytest.raises(ValueError):
        gen.Cont51Config(1)
    with pytest.raises(ValueError):
        gen.ClnlbeamConfig(0)


def test_cont5_1_rows_touch_expected_columns():
    n = 3
    m = gen.gen_cont5_1(gen.Cont51Config(n))
    plan = nl.compile_jacobian(m)

    def y(i, j):
        return (i - 1) * (n + 1) + (j - 1)

    first = set(plan.indices[plan.indptr[0] : plan.indptr[1]].tolist())
    assert first == {y(1, 1), y(1, 2), y(1, 3), y(2, 1), y(2, 2), y(2, 3)}
    last = set(plan.indices[plan.indptr[-2] : plan.indptr[-1]].tolist())
    assert last == {y(n + 1, n - 1), y(n + 1, n), y(n + 1, n + 1), (n + 1) ** 2 + n - 1}
