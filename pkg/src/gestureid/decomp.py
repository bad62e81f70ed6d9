"""Symmetric eigensolver, pseudoinverse and the SVM dual QP solver."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from .errors import ConvergenceError, DataError

JACOBI_MAX_SWEEPS = 100
JACOBI_OFF_TOL = 1e-12
# above this size the LAPACK driver is used; Jacobi is O(n^3) per sweep
JACOBI_MAX_N = 128
RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0
    method: str = "jacobi"


@dataclass(frozen=True, eq=False)
class QPSolution:
    alpha: np.ndarray
    bias: float
    iterations: int
    converged: bool
    gap: float
    trace: list = field(default_factory=list)


@lru_cache(maxsize=64)
def _round_robin(n):
    """(steps, pairs, 2) array: disjoint (p, q) index pairs for each step of a sweep.

    Pairs touching the padding index (odd n) are marked with -1.
    """
    size = n + (n % 2)
    players = list(range(size))
    rounds = np.full((max(size - 1, 1), max(size // 2, 1), 2), -1, dtype=np.int64)
    for r in range(size - 1):
        for k in range(size // 2):
            a, b = players[k], players[size - 1 - k]
            if a < n and b < n:
                rounds[r, k] = (min(a, b), max(a, b))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


@njit(cache=True)
def _jacobi_sweeps(a, v, rounds, threshold, max_sweeps):
    n = a.shape[0]
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for r in range(n):
            for c in range(n):
                if r != c:
                    off += a[r, c] * a[r, c]
        if np.sqrt(off) <= threshold:
            return sweep, True
        if sweep == max_sweeps:
            break
        for step in range(rounds.shape[0]):
            for k in range(rounds.shape[1]):
                p = rounds[step, k, 0]
                q = rounds[step, k, 1]
                if p < 0:
                    continue
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.hypot(theta, 1.0))
                if theta < 0:
                    t = -t
                cs = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * cs
                for i in range(n):
                    aip = a[i, p]
                    aiq = a[i, q]
                    a[i, p] = cs * aip - sn * aiq
                    a[i, q] = sn * aip + cs * aiq
                for i in range(n):
                    api = a[p, i]
                    aqi = a[q, i]
                    a[p, i] = cs * api - sn * aqi
                    a[q, i] = sn * api + cs * aqi
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = cs * vip - sn * viq
                    v[i, q] = sn * vip + cs * viq
    return max_sweeps, False


def _jacobi(a, max_sweeps=JACOBI_MAX_SWEEPS, tol=JACOBI_OFF_TOL):
    """Cyclic Jacobi; each sweep visits every (p, q) pair once in round-robin order."""
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0.0:
        return np.diag(a).copy(), v, 0
    a = np.ascontiguousarray(a)
    sweeps, ok = _jacobi_sweeps(a, v, _round_robin(n), tol * scale, max_sweeps)
    if not ok:
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        raise ConvergenceError(
            f"Jacobi eigensolver did not converge in {max_sweeps} sweeps (off-diagonal norm {off:.3e})"
        )
    return np.diag(a).copy(), v, sweeps


def eig_symmetric(A, method="auto", max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    ``method`` is ``"jacobi"`` (cyclic Jacobi, round-robin pair ordering),
    ``"lapack"`` (``numpy.linalg.eigh``) or ``"auto"``, which picks Jacobi up to
    ``JACOBI_MAX_N`` rows. Each eigenvector's largest-magnitude entry is made
    positive so results are deterministic.
    """
    A = np.array(A, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DataError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    norm = np.linalg.norm(A)
    if not np.all(np.isfinite(A)):
        raise DataError("matrix has non-finite entries")
    if np.linalg.norm(A - A.T) > 1e-9 * max(norm, np.finfo(float).tiny):
        raise DataError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX_N else "lapack"
    sweeps = 0
    if method == "jacobi":
        w, v, sweeps = _jacobi(A, max_sweeps)
    elif method == "lapack":
        w, v = np.linalg.eigh(A)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    if n:
        idx = np.argmax(np.abs(v), axis=0)
        signs = np.where(v[idx, np.arange(n)] < 0, -1.0, 1.0)
        v = v * signs
    return EigenResult(w, v, sweeps, method)


def pinv(A, rank_tol=RANK_TOL, method="auto"):
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix via its eigensystem."""
    res = eig_symmetric(A, method=method)
    w, v = res.eigenvalues, res.eigenvectors
    if w.size == 0:
        return np.zeros_like(np.asarray(A, dtype=float))
    lam_max = np.max(np.abs(w))
    keep = w > rank_tol * lam_max if lam_max > 0 else np.zeros(w.shape, dtype=bool)
    vk = v[:, keep]
    return (vk / w[keep]) @ vk.T


def solve_box_qp(K, y, C, tol=1e-3, max_iter=None, record_trace=False):
    """Soft-margin SVM dual by SMO with maximal-violating-pair selection.

    Maximises ``sum(a) - a.Q.a / 2`` with ``Q = y y^T * K`` subject to
    ``0 <= a <= C`` and ``y.a = 0``. Stops when the maximal KKT violation gap
    ``m(a) - M(a)`` drops to ``tol``, which bounds every per-sample KKT
    residual of the returned (alpha, bias) by ``tol``.
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if K.shape != (n, n):
        raise DataError(f"kernel matrix shape {K.shape} does not match {n} labels")
    if not np.all(np.abs(y) == 1.0):
        raise DataError("labels must be -1 or +1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DataError("both classes must be present")
    if not C > 0:
        raise DataError("C must be positive")
    if max_iter is None:
        max_iter = max(10_000, 200 * n)

    alpha, score, up, low, it, converged, gap, trace = _smo_loop(
        np.ascontiguousarray(K), y, float(C), float(tol), int(max_iter), bool(record_trace)
    )
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(np.mean(score[free]))
    else:
        hi = np.max(score[up]) if up.any() else np.min(score[low])
        lo = np.min(score[low]) if low.any() else hi
        bias = float(0.5 * (hi + lo))
    return QPSolution(alpha, bias, int(it), bool(converged), float(gap), trace.tolist() if record_trace else [])


@njit(cache=True)
def _smo_loop(K, y, C, tol, max_iter, record_trace):
    n = y.shape[0]
    alpha = np.zeros(n)
    # score = -y * gradient of (1/2 a.Q.a - sum(a)); starts at y
    score = y.copy()
    pos = y > 0
    # up: alpha may move in the +y direction; low: in the -y direction
    up = pos.copy()
    low = ~pos
    trace = np.zeros(max_iter + 1 if record_trace else 1)
    converged = False
    gap = np.inf
    it = 0
    while True:
        i = -1
        j = -1
        best_up = -np.inf
        best_low = np.inf
        for t in range(n):
            if up[t] and score[t] > best_up:
                best_up = score[t]
                i = t
            if low[t] and score[t] < best_low:
                best_low = score[t]
                j = t
        if i < 0 or j < 0:
            gap = 0.0
            converged = True
            break
        gap = best_up - best_low
        if gap <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        curv = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if curv <= 0:
            curv = 1e-12
        step = gap / curv
        lim_i = C - alpha[i] if pos[i] else alpha[i]
        lim_j = alpha[j] if pos[j] else C - alpha[j]
        step = min(step, lim_i, lim_j)
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        # snap to the box when a limit was hit
        if step == lim_i:
            alpha[i] = C if pos[i] else 0.0
        if step == lim_j:
            alpha[j] = 0.0 if pos[j] else C
        for t in range(n):
            score[t] -= step * (K[i, t] - K[j, t])
        for t in (i, j):
            if pos[t]:
                up[t] = alpha[t] < C
                low[t] = alpha[t] > 0
            else:
                up[t] = alpha[t] > 0
                low[t] = alpha[t] < C
        if record_trace:
            # dual objective sum(a) - a.Q.a/2, with Q a = -y * score - 1 elementwise
            s = 0.0
            for t in range(n):
                s += alpha[t] * (1.0 + y[t] * score[t])
            trace[it] = 0.5 * s
    if record_trace:
        trace = trace[: it + 1]
    return alpha, score, up, low, it, converged, gap, trace


def kkt_violation(K, y, alpha, bias, C):
    """Largest per-sample KKT residual of a soft-margin dual solution."""
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    margins = y * (K @ (alpha * y) + bias)
    at_zero = alpha <= 0
    at_c = alpha >= C
    free = ~(at_zero | at_c)
    viol = np.zeros_like(margins)
    viol[at_zero] = np.maximum(0.0, 1.0 - margins[at_zero])
    viol[at_c] = np.maximum(0.0, margins[at_c] - 1.0)
    viol[free] = np.abs(margins[free] - 1.0)
    return float(viol.max()) if viol.size else 0.0
