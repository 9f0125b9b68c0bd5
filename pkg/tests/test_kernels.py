import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orkit import kernels as K
from orkit.sparse import CSCMatrix, CSRMatrix, SparseVector, csc_to_csr, csr_to_csc

# ---------------------------------------------------------- references


def ref_matvec_restricted(A, x, flags):
    y = A.T @ x
    return np.where(flags, y, 0.0)


def ref_ratio(d, alpha, state, eps_p, eps_d):
    cand = [i for i in range(len(d)) if state[i] == K.LOWER and alpha[i] > eps_p]
    if not cand:
        return None, math.inf, cand
    theta = min((d[i] + eps_d) / alpha[i] for i in cand)
    best, big = None, 0.0
    for i in cand:
        if d[i] / alpha[i] <= theta and alpha[i] > big:
            best, big = i, alpha[i]
    return best, theta, cand


def ref_axpy(a, x, y, eps, positions):
    y = y.copy()
    flagged = []
    for j in positions:
        y[j] = a * x[j] + y[j]
        if y[j] < -eps:
            flagged.append(j)
    return y, flagged


def example_matrix():
    return np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])


# ------------------------------------------------------------ examples


def test_restricted_matvec_example():
    A = CSCMatrix.from_dense(example_matrix())
    y = K.restricted_transpose_matvec_dense(A, [1.0, 2.0], [1, 0, 1])
    assert y.tolist() == [1.0, 0.0, 3.0]
    assert K.restricted_transpose_matvec_dense(A, [1.0, 2.0], [0, 0, 0]).tolist() == [0.0] * 3


def test_restricted_matvec_identity():
    A = CSCMatrix.from_dense(np.eye(4))
    x = np.array([1.5, -2.0, 0.0, 7.0])
    assert K.restricted_transpose_matvec_dense(A, x, np.ones(4)).tolist() == x.tolist()


def test_restricted_matvec_dimension_errors():
    A = CSCMatrix.from_dense(example_matrix())
    with pytest.raises(ValueError):
        K.restricted_transpose_matvec_dense(A, [1.0], [1, 1, 1])
    with pytest.raises(ValueError):
        K.restricted_transpose_matvec_dense(A, [1.0, 2.0], [1, 1])


def test_sparse_matvec_examples():
    A = CSRMatrix.from_dense(example_matrix())
    y = K.transpose_matvec_sparse(A, SparseVector(2, [0], [1.0]))
    assert y.indices.tolist() == [0, 2] and y.values.tolist() == [1.0, 1.0]
    y = K.transpose_matvec_sparse(A, SparseVector(2, [], []))
    assert y.nnz == 0 and y.n == 3
    y = K.transpose_matvec_sparse(A, SparseVector(2, [0, 1], [1.0, 1.0]))
    assert y.indices.tolist() == [0, 2, 1]  # first-touch order
    assert y.values.tolist() == [1.0, 2.0, 1.0]
    assert y.to_dense().tolist() == (example_matrix().T @ [1.0, 1.0]).tolist()
    with pytest.raises(ValueError):
        K.transpose_matvec_sparse(A, SparseVector(3, [0], [1.0]))


def test_harris_picks_large_pivot():
    d = [0.0, 1e-8]
    alpha = [1e-6, 1.0]
    state = K.state_vector(["lower", "lower"])
    r = K.ratio_test(d, alpha, state, 1e-9, 1e-7)
    assert r.result == 1
    assert r.theta_max == pytest.approx(1.1e-7, rel=1e-12)
    assert K.naive_min_ratio(d, alpha) == 0
    rs = K.ratio_test(d, SparseVector(2, [0, 1], alpha), state, 1e-9, 1e-7)
    assert rs.result == 1 and rs.theta_max == r.theta_max


def test_ratio_no_candidates():
    r = K.ratio_test([1.0, 2.0], [1e-12, -3.0], [K.LOWER, K.LOWER], 1e-9, 1e-7)
    assert r.result is None and r.theta_max == math.inf and len(r.candidates) == 0


def test_ratio_small_example():
    r = K.ratio_test([1.0, 2.0], [0.5, 2.0], [K.LOWER, K.LOWER], 1e-7, 1e-7)
    assert r.result == 1
    assert r.theta_max == pytest.approx(1.00000005)


def test_ratio_skips_basic_and_ties_first_seen():
    r = K.ratio_test([0.0, 0.0, 0.0], [2.0, 2.0, 5.0], [K.LOWER, K.LOWER, K.BASIC], 1e-9, 1e-7)
    assert r.result == 0
    rs = K.ratio_test([0.0, 0.0, 0.0], SparseVector(3, [1, 0], [2.0, 2.0]), [K.LOWER] * 3, 1e-9, 1e-7)
    assert rs.result == 1  # stored order decides the tie


@pytest.mark.parametrize("eps_p, eps_d", [(0.0, 1e-7), (1e-9, -1.0)])
def test_ratio_rejects_bad_tolerances(eps_p, eps_d):
    with pytest.raises(ValueError):
        K.ratio_test([1.0], [1.0], [K.LOWER], eps_p, eps_d)


def test_state_vector_rejects_unknown():
    with pytest.raises(ValueError):
        K.state_vector(["upper"])


def test_axpy_examples():
    y = np.array([1.0, 1.0])
    assert K.axpy_checked(1.0, np.array([-2.0, 0.5]), y, 1e-6).tolist() == [0]
    assert y.tolist() == [-1.0, 1.5]
    y = np.array([-1.0, 2.0, -3.0])
    assert K.axpy_checked(0.0, np.zeros(3), y, 1e-6).tolist() == [0, 2]
    assert y.tolist() == [-1.0, 2.0, -3.0]
    assert K.axpy_checked(0.0, SparseVector(3, [1], [5.0]), y, 1e-6).tolist() == []
    assert K.axpy_checked(2.0, SparseVector(3, [], []), y, 1e-6).tolist() == []
    assert y.tolist() == [-1.0, 2.0, -3.0]


def test_axpy_requires_float_buffer():
    with pytest.raises(TypeError):
        K.axpy_checked(1.0, np.zeros(2), [0.0, 0.0], 1e-6)
    with pytest.raises(ValueError):
        K.axpy_checked(1.0, np.zeros(3), np.zeros(2), 1e-6)


def test_storage_transpose():
    I = CSCMatrix.from_dense(np.eye(3))
    back = csr_to_csc(csc_to_csr(I))
    assert back.same_storage(I)
    rng = np.random.default_rng(4)
    D = rng.normal(size=(20, 30)) * (rng.random((20, 30)) < 0.2)
    A = CSCMatrix.from_dense(D)
    R = csc_to_csr(A)
    R.check()
    assert np.array_equal(R.to_dense(), D)
    assert csr_to_csc(R).same_storage(A)
    E = CSCMatrix.from_dense(np.zeros((0, 0)))
    assert csc_to_csr(E).nnz == 0 and csc_to_csr(E).shape == (0, 0)


def test_invalid_storage_detected():
    with pytest.raises(ValueError):
        CSCMatrix(2, 1, [0, 2], [1, 0], [1.0, 1.0]).check()
    with pytest.raises(ValueError):
        CSCMatrix(2, 1, [0, 1], [2], [1.0]).check()
    with pytest.raises(ValueError):
        SparseVector(3, [1, 1], [1.0, 2.0]).check()


# --------------------------------------------------- oracle equivalence


@st.composite
def cases(draw):
    m = draw(st.integers(1, 50))
    n = draw(st.integers(1, 50))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    D = rng.normal(size=(m, n)) * (rng.random((m, n)) < rng.uniform(0.02, 0.5))
    x = rng.normal(size=m) * (rng.random(m) < rng.uniform(0.05, 1.0))
    flags = rng.random(n) < 0.6
    state = np.where(rng.random(n) < 0.7, K.LOWER, K.BASIC).astype(np.uint8)
    d = np.abs(rng.normal(size=n)) * (rng.random(n) < 0.8)
    return D, x, flags, state, d, rng


def _sparse_x(x, rng):
    idx = np.flatnonzero(x)
    rng.shuffle(idx)
    return SparseVector(len(x), idx, x[idx])


@settings(max_examples=200)
@given(cases())
def test_kernels_match_references(case):
    D, x, flags, state, d, rng = case
    A = CSCMatrix.from_dense(D)
    R = csc_to_csr(A)
    y = K.restricted_transpose_matvec_dense(A, x, flags)
    ref = ref_matvec_restricted(D, x, flags)
    assert np.max(np.abs(y - ref), initial=0) <= 1e-12

    xs = _sparse_x(x, rng)
    ys = K.transpose_matvec_sparse(R, xs)
    touched = sorted({int(j) for i in xs.indices for j in np.flatnonzero(D[i])})
    assert sorted(ys.indices.tolist()) == touched
    assert np.max(np.abs(ys.to_dense() - D.T @ x), initial=0) <= 1e-12

    alpha = ys.to_dense()
    r = K.ratio_test(d, alpha, state, 1e-9, 1e-7)
    best, theta, cand = ref_ratio(d, alpha, state, 1e-9, 1e-7)
    assert r.result == best and r.candidates.tolist() == cand
    assert (theta == r.theta_max == math.inf) or abs(theta - r.theta_max) <= 1e-12 * max(1.0, abs(theta))
    if r.result is not None:
        i = r.result
        assert all(d[i] / alpha[i] <= (d[j] + 1e-7) / alpha[j] for j in cand)
    rsp = K.ratio_test(d, SparseVector(len(alpha), np.arange(len(alpha)), alpha), state, 1e-9, 1e-7)
    assert rsp.result == r.result

    a = float(rng.normal())
    yv = rng.normal(size=len(alpha))
    yd = yv.copy()
    fl = K.axpy_checked(a, alpha, yd, 1e-6)
    ry, rfl = ref_axpy(a, alpha, yv, 1e-6, range(len(alpha)))
    assert fl.tolist() == rfl and np.max(np.abs(yd - ry), initial=0) <= 1e-12
    ysp = yv.copy()
    fl = K.axpy_checked(a, ys, ysp, 1e-6)
    ry, rfl = ref_axpy(a, alpha, yv, 1e-6, ys.indices.tolist())
    assert fl.tolist() == rfl and np.max(np.abs(ysp - ry), initial=0) <= 1e-12
