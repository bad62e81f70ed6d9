import numpy as np
import pytest
from hypothesis import given, strategies as st

from gestureid.decomp import eig_symmetric, kkt_violation, pinv, solve_box_qp
from gestureid.errors import DataError


def random_symmetric(rng, n):
    A = rng.normal(size=(n, n))
    return (A + A.T) / 2


def random_psd(rng, n, rank):
    G = rng.normal(size=(n, rank))
    return G @ G.T


def penrose_residuals(A, P):
    scale = max(np.linalg.norm(A), 1.0)
    pscale = max(np.linalg.norm(P), 1.0)
    return (
        np.linalg.norm(A @ P @ A - A) / scale,
        np.linalg.norm(P @ A @ P - P) / pscale,
        np.linalg.norm((A @ P).T - A @ P),
        np.linalg.norm((P @ A).T - P @ A),
    )


def dual_objective(K, y, a):
    Q = np.outer(y, y) * K
    return a.sum() - 0.5 * a @ Q @ a


def test_identity():
    res = eig_symmetric(np.eye(3))
    np.testing.assert_allclose(res.eigenvalues, [1, 1, 1])
    np.testing.assert_allclose(res.eigenvectors @ np.diag(res.eigenvalues) @ res.eigenvectors.T, np.eye(3),
                               atol=1e-12)


def test_diagonal_gives_signed_unit_basis():
    res = eig_symmetric(np.diag([2.0, 5.0, -1.0]))
    np.testing.assert_allclose(res.eigenvalues, [5, 2, -1])
    np.testing.assert_allclose(res.eigenvectors, [[0, 1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)


@pytest.mark.parametrize("method", ["jacobi", "lapack"])
def test_reconstruction_20(rng, method):
    A = random_symmetric(rng, 20)
    res = eig_symmetric(A, method=method)
    O, lam = res.eigenvectors, res.eigenvalues
    assert np.linalg.norm(O @ np.diag(lam) @ O.T - A) / np.linalg.norm(A) <= 1e-8


def test_jacobi_agrees_with_lapack(rng):
    A = random_symmetric(rng, 30)
    a = eig_symmetric(A, method="jacobi")
    b = eig_symmetric(A, method="lapack")
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, atol=1e-10)
    # same sign convention, distinct eigenvalues: vectors agree
    np.testing.assert_allclose(a.eigenvectors, b.eigenvectors, atol=1e-8)


def test_largest_entry_positive(rng):
    res = eig_symmetric(random_symmetric(rng, 12))
    V = res.eigenvectors
    idx = np.argmax(np.abs(V), axis=0)
    assert np.all(V[idx, np.arange(12)] > 0)


def test_asymmetric_rejected():
    with pytest.raises(DataError, match="not symmetric"):
        eig_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_nonconvergence_is_reported(rng):
    from gestureid.errors import ConvergenceError

    with pytest.raises(ConvergenceError):
        eig_symmetric(random_symmetric(rng, 20), method="jacobi", max_sweeps=1)


def test_pinv_invertible_diagonal():
    np.testing.assert_allclose(pinv(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))


def test_pinv_rank_one():
    np.testing.assert_allclose(pinv(np.array([[1.0, 0.0], [0.0, 0.0]])), [[1, 0], [0, 0]])


def test_pinv_rank_deficient_psd(rng):
    A = random_psd(rng, 15, 7)
    P = pinv(A)
    assert np.linalg.norm(A @ P @ A - A) / np.linalg.norm(A) <= 1e-6
    assert max(penrose_residuals(A, P)) <= 1e-6


def test_two_point_dual_analytic():
    # x = -1 (y=-1), x = +1 (y=+1), linear kernel: maximise a1 + a2 - (a1 + a2)^2 / 2
    # subject to a1 = a2, so a = 1/2 each, w = 1, b = 0
    x = np.array([-1.0, 1.0])
    y = np.array([-1.0, 1.0])
    sol = solve_box_qp(np.outer(x, x), y, C=1e6)
    np.testing.assert_allclose(sol.alpha, [0.5, 0.5], atol=1e-12)
    assert abs(sol.bias) <= 1e-12
    assert sol.converged


def test_separable_blobs_zero_training_error(rng):
    X = np.vstack([rng.normal(-3, 0.5, size=(20, 2)), rng.normal(3, 0.5, size=(20, 2))])
    y = np.repeat([-1.0, 1.0], 20)
    K = X @ X.T
    sol = solve_box_qp(K, y, C=100.0)
    f = K @ (sol.alpha * y) + sol.bias
    assert np.all(np.sign(f) == y)
    assert kkt_violation(K, y, sol.alpha, sol.bias, 100.0) <= 1e-3


def test_tiny_c_bounds_decision_values(rng):
    X = rng.normal(size=(30, 3))
    y = np.where(rng.random(30) > 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    K = np.exp(-0.5 * ((X[:, None] - X[None]) ** 2).sum(-1))
    C = 1e-6
    sol = solve_box_qp(K, y, C)
    assert np.all(sol.alpha >= 0) and np.all(sol.alpha <= C)
    assert np.max(np.abs(K @ (sol.alpha * y))) <= 30 * C * np.max(np.abs(K))


def test_qp_rejects_bad_labels():
    with pytest.raises(DataError):
        solve_box_qp(np.eye(2), np.array([1.0, 1.0]), 1.0)
    with pytest.raises(DataError):
        solve_box_qp(np.eye(2), np.array([1.0, 0.0]), 1.0)


@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_property_eigen_invariants(n, seed):
    rng = np.random.default_rng(seed)
    A = random_symmetric(rng, n)
    res = eig_symmetric(A)
    lam, O = res.eigenvalues, res.eigenvectors
    norm = np.linalg.norm(A)
    assert np.all(np.diff(lam) <= 0)
    assert abs(lam.sum() - np.trace(A)) <= 1e-8 * max(norm, 1.0)
    assert np.max(np.abs(O.T @ O - np.eye(n))) <= 1e-9
    assert np.max(np.linalg.norm(A @ O - O * lam, axis=0)) <= 1e-8 * norm


@given(st.integers(1, 20).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n))), st.integers(0, 2**32 - 1))
def test_property_penrose_identities(shape, seed):
    n, rank = shape
    A = random_psd(np.random.default_rng(seed), n, rank)
    assert max(penrose_residuals(A, pinv(A))) <= 1e-6


@given(st.integers(4, 60), st.floats(0.01, 100.0), st.booleans(), st.integers(0, 2**32 - 1))
def test_property_qp_kkt_and_monotone_objective(n, C, separable, seed):
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    shift = 3.0 if separable else 0.3
    X = rng.normal(size=(n, 3)) + shift * y[:, None]
    K = np.exp(-0.2 * ((X[:, None] - X[None]) ** 2).sum(-1))
    sol = solve_box_qp(K, y, C, record_trace=True)
    assert sol.converged
    assert np.all(sol.alpha >= 0) and np.all(sol.alpha <= C)
    assert abs(sol.alpha @ y) <= 1e-3
    assert kkt_violation(K, y, sol.alpha, sol.bias, C) <= 1e-3 + 1e-9
    trace = np.asarray(sol.trace)
    assert np.all(np.diff(trace) >= -1e-9 * max(1.0, np.abs(trace).max()))
    assert trace[-1] == pytest.approx(dual_objective(K, y, sol.alpha), rel=1e-9, abs=1e-9)
