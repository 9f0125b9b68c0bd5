import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from orkit import generators as gen
from orkit import nlexpr as nl
from orkit.model import RowSense


def fd_jacobian(m, x, h=1e-6):
    """Central differences of the residuals, column by column."""
    J = np.zeros((m.num_constraints, m.num_vars))
    for j in range(m.num_vars):
        e = np.zeros(m.num_vars)
        e[j] = h
        J[:, j] = (nl.evaluate_constraints(m, x + e) - nl.evaluate_constraints(m, x - e)) / (2 * h)
    return J


def test_sin_derivative_is_cos():
    d = nl.differentiate(nl.sin(nl.var(0)), 0)
    assert isinstance(d, nl.Cos) and isinstance(d.child, nl.Var)


def test_folding_of_zero_and_one():
    x, y = nl.var(0), nl.var(1)
    assert isinstance(nl.differentiate(nl.mul(nl.const(0.0), x), 0), nl.Const)
    assert nl.differentiate(nl.mul(nl.const(1.0), x), 0).value == 1.0
    d = nl.differentiate(nl.add(x, nl.const(2.0)), 0)
    assert isinstance(d, nl.Const) and d.value == 1.0
    d = nl.differentiate(nl.mul(x, y), 0)
    assert isinstance(d, nl.Var) and d.column == 1
    assert nl.differentiate(nl.sin(y), 0).value == 0.0


def test_constant_arithmetic_folds():
    x = nl.var(0)
    d = nl.differentiate(nl.mul(nl.const(3.0), nl.const(2.0), x), 0)
    assert isinstance(d, nl.Const) and d.value == 6.0


def test_clnlbeam_row_partial():
    n = 4
    h = 1.0 / n
    m = gen.gen_clnlbeam(gen.ClnlbeamConfig(n))
    t0 = 0  # column of t_1
    d = nl.differentiate(m.constraints[0], t0)
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, m.num_vars)
    assert nl.evaluate(d, x) == pytest.approx(-(0.5 * h) * math.cos(x[t0]), abs=1e-15)


def test_power_chain_at_two():
    y = nl.var(0)
    e = nl.mul(y, nl.power(nl.power(y, 2), Fraction(3, 2)))
    d = nl.differentiate(e, 0)
    assert nl.evaluate(d, [2.0]) == pytest.approx(32.0, rel=1e-14)
    h = 1e-6
    fd = (nl.evaluate(e, [2.0 + h]) - nl.evaluate(e, [2.0 - h])) / (2 * h)
    assert fd == pytest.approx(32.0, rel=1e-8)


def test_square_then_fractional_power_of_negative():
    y = nl.var(0)
    assert nl.evaluate(nl.power(nl.power(y, 2), Fraction(3, 2)), [-2.0]) == pytest.approx(8.0)


def test_fractional_power_of_negative_is_domain_error():
    e = nl.power(nl.var(0), Fraction(1, 2))
    with pytest.raises(nl.DomainError):
        nl.evaluate(e, [-1.0])
    m = nl.NonlinearModel()
    m.add_variable()
    m.add_constraint(e)
    with pytest.raises(nl.DomainError):
        nl.evaluate_constraints(m, [-4.0])
    plan = nl.compile_jacobian(m)
    with pytest.raises(nl.DomainError):
        nl.evaluate_jacobian(plan, [-4.0])


def test_sin_at_half_pi():
    assert nl.evaluate(nl.sin(nl.var(0)), [math.pi / 2]) == pytest.approx(1.0, abs=1e-15)


def test_unsupported_node():
    class Tan(nl.Node):
        __slots__ = ("child",)

        def __init__(self, child):
            self.child = child

    with pytest.raises(nl.UnsupportedOperatorError):
        nl.differentiate(Tan(nl.var(0)), 0)
    with pytest.raises(nl.UnsupportedOperatorError):
        nl.canonical_key(Tan(nl.var(0)))
    m = nl.NonlinearModel()
    m.add_variable()
    m.add_constraint(Tan(nl.var(0)))
    with pytest.raises(nl.UnsupportedOperatorError):
        nl.compile_jacobian(m)


def test_canonical_keys():
    assert nl.canonical_key(nl.sin(nl.var(0))) == nl.canonical_key(nl.sin(nl.var(1)))
    assert nl.canonical_key(nl.sin(nl.var(0))) != nl.canonical_key(nl.cos(nl.var(0)))
    # the renaming must be one-to-one
    a = nl.add(nl.var(0), nl.var(0))
    b = nl.add(nl.var(0), nl.var(1))
    assert nl.canonical_key(a) != nl.canonical_key(b)
    # constants compare bitwise
    assert nl.canonical_key(nl.const(0.0)) != nl.canonical_key(nl.const(-0.0))
    assert nl.canonical_key(nl.const(0.1)) != nl.canonical_key(nl.const(0.1 + 1e-17 * 2))


def test_duplicate_variable_single_entry():
    m = nl.NonlinearModel()
    x = m.add_variable()
    m.add_constraint(nl.add(nl.sin(x), nl.sin(x)))
    plan = nl.compile_jacobian(m)
    assert plan.nnz == 1
    assert nl.evaluate_jacobian(plan, [0.3])[0] == pytest.approx(2 * math.cos(0.3))


def test_clnlbeam_at_origin():
    n = 10
    m = gen.gen_clnlbeam(gen.ClnlbeamConfig(n))
    plan = nl.compile_jacobian(m)
    J = plan.to_dense(nl.evaluate_jacobian(plan, np.zeros(m.num_vars)))
    h = 1.0 / n
    for i in range(n):
        row = J[i]
        x_next, x_cur = (n + 1) + i + 1, (n + 1) + i
        assert row[x_next] == 1.0 and row[x_cur] == -1.0
        assert row[i + 1] == pytest.approx(-0.5 * h) and row[i] == pytest.approx(-0.5 * h)
        assert np.count_nonzero(row) == 4
    assert plan.num_classes == 2


def test_evaluation_is_pure():
    m = gen.gen_cont5_1(gen.Cont51Config(4))
    plan = nl.compile_jacobian(m)
    x = np.random.default_rng(1).uniform(-1, 1, m.num_vars)
    a = nl.evaluate_jacobian(plan, x)
    b = nl.evaluate_jacobian(plan, x.copy())
    assert a.tobytes() == b.tobytes()


def test_dimension_mismatch():
    m = gen.gen_clnlbeam(gen.ClnlbeamConfig(2))
    plan = nl.compile_jacobian(m)
    with pytest.raises(ValueError):
        nl.evaluate_jacobian(plan, np.zeros(3))
    with pytest.raises(ValueError):
        nl.evaluate_constraints(m, np.zeros(3))


def test_out_of_range_column_rejected():
    m = nl.NonlinearModel()
    m.add_variable()
    m.add_constraint(nl.var(3))
    with pytest.raises(ValueError):
        nl.compile_jacobian(m)


@pytest.mark.parametrize("family, n", [("clnlbeam", 4), ("cont5_1", 4), ("clnlbeam", 10), ("cont5_1", 6)])
def test_structure_and_dedup(family, n):
    m = gen.gen_clnlbeam(gen.ClnlbeamConfig(n)) if family == "clnlbeam" else gen.gen_cont5_1(gen.Cont51Config(n))
    plan = nl.compile_jacobian(m)
    slots = 0
    for i, c in enumerate(m.constraints):
        _, cols = nl._key_and_columns(c)
        assert plan.indices[plan.indptr[i] : plan.indptr[i + 1]].tolist() == cols
    for cp in plan.classes:
        slots += cp.columns.shape[1]
    assert plan.n_differentiations == slots


@pytest.mark.parametrize("family, n", [("clnlbeam", 3), ("cont5_1", 3), ("cont5_1", 2)])
def test_fd_agreement_generated(family, n):
    m = gen.gen_clnlbeam(gen.ClnlbeamConfig(n)) if family == "clnlbeam" else gen.gen_cont5_1(gen.Cont51Config(n))
    plan = nl.compile_jacobian(m)
    rng = np.random.default_rng(7)
    for _ in range(10):
        x = rng.uniform(-1, 1, m.num_vars)
        J = plan.to_dense(nl.evaluate_jacobian(plan, x))
        fd = fd_jacobian(m, x)
        assert np.all(np.abs(J - fd) <= 1e-6 * (1 + np.abs(J)))


# random expression trees over a handful of variables

NV = 4
leaves = st.one_of(
    st.integers(0, NV - 1).map(nl.Var),
    st.floats(-3, 3, allow_nan=False).map(nl.Const),
)


def _extend(children):
    return st.one_of(
        st.lists(children, min_size=1, max_size=3).map(nl.Sum),
        st.lists(children, min_size=1, max_size=3).map(nl.Prod),
        children.map(nl.Neg),
        children.map(nl.Sin),
        children.map(nl.Cos),
        st.tuples(children, st.integers(0, 3)).map(lambda t: nl.Pow(t[0], t[1])),
        children.map(lambda c: nl.Pow(nl.Pow(c, 2), Fraction(3, 2))),
    )


trees = st.recursive(leaves, _extend, max_leaves=10)


@given(st.lists(trees, min_size=1, max_size=4), st.lists(st.floats(-1, 1), min_size=NV, max_size=NV))
def test_random_trees_match_finite_differences(roots, point):
    m = nl.NonlinearModel()
    for _ in range(NV):
        m.add_variable()
    for r in roots:
        m.add_constraint(r, RowSense.EQ)
    x = np.array(point)
    plan = nl.compile_jacobian(m)
    J = plan.to_dense(nl.evaluate_jacobian(plan, x))
    # scalar symbolic route as an independent check of the tapes
    for i, r in enumerate(roots):
        for j in range(NV):
            assert J[i, j] == pytest.approx(nl.evaluate(nl.differentiate(r, j), x), rel=1e-12, abs=1e-12)
    fd = fd_jacobian(m, x, h=1e-5)
    scale = 1 + np.abs(J) + np.abs(nl.evaluate_constraints(m, x))[:, None]
    assert np.all(np.abs(J - fd) <= 1e-4 * scale)


@given(trees, st.permutations(list(range(NV))))
def test_keys_invariant_under_renaming(tree, perm):
    def rename(nd):
        t = type(nd)
        if t is nl.Var:
            return nl.Var(perm[nd.column])
        if t is nl.Const:
            return nd
        if t in (nl.Sum, nl.Prod):
            return t([rename(c) for c in nd.children])
        if t is nl.Pow:
            return nl.Pow(rename(nd.base), nd.exponent)
        return t(rename(nd.child))

    assert nl.canonical_key(rename(tree)) == nl.canonical_key(tree)
