"""PCA reduction and the LDA, k-NN and SVM performer classifiers.

All ``*_predict`` functions accept a single vector (returning one label) or
a 2-D batch (returning an array of labels). Labels are compared as numpy
values; ties always resolve to the smallest label.
"""

import json
import warnings
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .decomp import RANK_TOL, eig_symmetric, solve_box_qp
from .errors import DataError, NumericalError

LDA_DEFAULT_MAX_D = 5
SUPPORT_EPS = 1e-12
ZERO_DECISION_RTOL = 1e-10


def _batch(x, dim, what="vector"):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != dim:
        raise DataError(f"dimension mismatch: {what} has {X.shape[-1]} entries, model expects {dim}")
    return X, single


def _labels(y, n):
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n:
        raise DataError(f"expected {n} labels, got shape {y.shape}")
    return y


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # rows are orthonormal directions
    eigenvalues: np.ndarray  # variance along each component, descending

    @property
    def n_components(self):
        return self.components.shape[0]

    def transform(self, X):
        return pca_transform(self, X)


def _complete_basis(V, count, dim):
    """Extend orthonormal rows ``V`` to ``count`` rows with unit-basis Gram-Schmidt."""
    rows = list(V)
    j = 0
    while len(rows) < count and j < dim:
        e = np.zeros(dim)
        e[j] = 1.0
        j += 1
        for _ in range(2):
            for r in rows:
                e -= (r @ e) * r
        nrm = np.linalg.norm(e)
        if nrm > 0.5:
            rows.append(e / nrm)
    return np.array(rows).reshape(len(rows), dim)


def pca_fit(X, n_components, method="auto"):
    """Principal components of the rows of ``X`` (mean removed here).

    When there are fewer samples than dimensions the n x n Gram matrix is
    decomposed instead of the p x p covariance.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("PCA needs at least 2 vectors")
    n, p = X.shape
    if not 1 <= n_components <= min(p, n):
        raise DataError(f"n_components={n_components} out of range 1..{min(p, n)}")
    mean = X.mean(axis=0)
    Xc = X - mean
    if n < p:
        res = eig_symmetric(Xc @ Xc.T, method=method)
        lam = np.clip(res.eigenvalues[:n_components], 0.0, None)
        tol = RANK_TOL * max(lam[0], 0.0) if lam.size else 0.0
        good = lam > tol
        comps = (Xc.T @ res.eigenvectors[:, :n_components][:, good]) / np.sqrt(lam[good])
        comps = comps.T
        if comps.shape[0] < n_components:
            comps = _complete_basis(comps, n_components, p)
            lam = np.where(good, lam, 0.0)
            lam = np.concatenate([lam[good], np.zeros(n_components - good.sum())])
    else:
        res = eig_symmetric(Xc.T @ Xc, method=method)
        lam = np.clip(res.eigenvalues[:n_components], 0.0, None)
        comps = res.eigenvectors[:, :n_components].T
    # sign: largest-magnitude entry of each component positive
    idx = np.argmax(np.abs(comps), axis=1)
    signs = np.where(comps[np.arange(comps.shape[0]), idx] < 0, -1.0, 1.0)
    comps = comps * signs[:, None]
    return PcaModel(mean, np.ascontiguousarray(comps), lam / n)


def pca_transform(model, x):
    X, single = _batch(x, model.mean.shape[0])
    Y = (X - model.mean) @ model.components.T
    return Y[0] if single else Y


# ---------------------------------------------------------------------------
# LDA


@dataclass(frozen=True, eq=False)
class LdaModel:
    projection: np.ndarray  # d x p', canonical vectors as rows
    classes: np.ndarray
    class_means: np.ndarray  # k x p', in the input space
    eigenvalues: np.ndarray
    singular_within: bool = False
    max_d: int = 0

    @property
    def d(self):
        return self.projection.shape[0]

    @property
    def means_by_class(self):
        return {c: self.class_means[i] for i, c in enumerate(self.classes.tolist())}

    def truncate(self, d):
        if not 1 <= d <= self.projection.shape[0]:
            raise DataError(f"d={d} exceeds the achievable maximum {self.projection.shape[0]}")
        return LdaModel(self.projection[:d], self.classes, self.class_means, self.eigenvalues[:d],
                        self.singular_within, self.max_d)


def scatter_matrices(X, y):
    """Between-class (1/(k-1) prefactor, about the mean of class means) and
    within-class (1/(n-k) prefactor) scatter."""
    X = np.asarray(X, dtype=float)
    y = _labels(y, X.shape[0])
    classes, inv, counts = np.unique(y, return_inverse=True, return_counts=True)
    k, n = classes.size, X.shape[0]
    if k < 2:
        raise DataError("need >= 2 classes")
    if n <= k:
        raise DataError(f"need more samples ({n}) than classes ({k}) for the within-class scatter")
    means = np.zeros((k, X.shape[1]))
    np.add.at(means, inv, X)
    means /= counts[:, None]
    centre = means.mean(axis=0)
    dm = means - centre
    B = (dm.T * counts) @ dm / (k - 1)
    R = X - means[inv]
    W = R.T @ R / (n - k)
    return B, W, classes, means


def lda_fit(X, y, d=None, rank_tol=RANK_TOL):
    """Fisher LDA with canonical vectors from the symmetric reformulation.

    ``W = U S U^T`` is whitened (using only eigenvalues above
    ``rank_tol * max``, which realises the pseudoinverse when W is singular)
    and ``S^-1/2 U^T B U S^-1/2`` is decomposed. Canonical vectors come back
    scaled so that ``v^T W v = 1``.
    """
    X = np.asarray(X, dtype=float)
    y = _labels(y, X.shape[0])
    B, W, classes, means = scatter_matrices(X, y)
    k = classes.size
    w_norm = np.linalg.norm(W)
    if np.linalg.norm(B) <= 1e-12 * max(w_norm, np.finfo(float).tiny):
        raise DataError("between-class scatter is zero: class means coincide")
    ew = eig_symmetric(W)
    s = ew.eigenvalues
    keep = s > rank_tol * s[0] if s[0] > 0 else np.zeros(s.shape, dtype=bool)
    r = int(keep.sum())
    if r == 0:
        raise NumericalError("within-class scatter is zero")
    T = ew.eigenvectors[:, keep] / np.sqrt(s[keep])
    M = T.T @ B @ T
    em = eig_symmetric(0.5 * (M + M.T))
    max_d = min(k - 1, r)
    if d is None:
        d = min(max_d, LDA_DEFAULT_MAX_D)
    elif d == "max":
        d = max_d
    if not 1 <= d <= max_d:
        raise DataError(f"d={d} exceeds the achievable maximum {max_d} (k-1={k - 1}, rank(W)={r})")
    V = T @ em.eigenvectors[:, :max_d]
    return LdaModel(
        np.ascontiguousarray(V.T[:d]),
        classes,
        means,
        np.clip(em.eigenvalues[:d], 0.0, None),
        singular_within=r < X.shape[1],
        max_d=max_d,
    )


def lda_project(model, X):
    Xb, single = _batch(X, model.class_means.shape[1])
    P = Xb @ model.projection.T
    return P[0] if single else P


def _nearest_with_ties(d2):
    """Row-wise argmin; values within a relative 1e-10 of the minimum tie and
    resolve to the lowest column (= smallest label)."""
    lo = d2.min(axis=1, keepdims=True)
    spread = d2.max(axis=1, keepdims=True)
    tied = d2 <= lo + 1e-10 * spread
    return np.argmax(tied, axis=1)


def lda_predict(model, x):
    X, single = _batch(x, model.class_means.shape[1])
    P = X @ model.projection.T
    Pm = model.class_means @ model.projection.T
    d2 = ((P[:, None, :] - Pm[None, :, :]) ** 2).sum(axis=2)
    out = model.classes[_nearest_with_ties(d2)]
    return out[0] if single else out


# ---------------------------------------------------------------------------
# k-NN


@dataclass(frozen=True, eq=False)
class KnnModel:
    references: np.ndarray
    labels: np.ndarray
    k: int

    @property
    def classes(self):
        return np.unique(self.labels)


def knn_fit(X, y, k):
    X = np.array(X, dtype=float)
    if X.ndim != 2:
        raise DataError("reference vectors must form a 2-D array")
    y = np.array(_labels(y, X.shape[0]))
    if not 1 <= k <= X.shape[0]:
        raise DataError(f"k={k} must lie in 1..{X.shape[0]} (reference count)")
    return KnnModel(X, y, int(k))


def knn_neighbors(model, X, k=None, chunk_elems=4_000_000):
    """Indices of the k nearest references per query, nearer first; equal
    distances keep reference order."""
    k = model.k if k is None else k
    R = model.references
    n_ref, p = R.shape
    rows = max(1, chunk_elems // max(1, n_ref * p))
    out = np.empty((X.shape[0], k), dtype=np.intp)
    for s in range(0, X.shape[0], rows):
        Q = X[s : s + rows]
        d2 = ((Q[:, None, :] - R[None, :, :]) ** 2).sum(axis=2)
        out[s : s + rows] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def knn_vote(neighbor_codes, n_classes):
    """Majority class code per row; ties go to the smallest code."""
    counts = np.zeros((neighbor_codes.shape[0], n_classes), dtype=np.intp)
    rows = np.repeat(np.arange(neighbor_codes.shape[0]), neighbor_codes.shape[1])
    np.add.at(counts, (rows, neighbor_codes.ravel()), 1)
    return np.argmax(counts, axis=1)


def knn_predict(model, x):
    X, single = _batch(x, model.references.shape[1])
    classes, codes = np.unique(model.labels, return_inverse=True)
    nb = knn_neighbors(model, X)
    out = classes[knn_vote(codes[nb], classes.size)]
    return out[0] if single else out


# ---------------------------------------------------------------------------
# SVM


@dataclass(frozen=True)
class Kernel:
    kind: str = "rbf"
    gamma: float = 0.01

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise DataError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and not self.gamma > 0:
            raise DataError("rbf kernel needs gamma > 0")

    def __call__(self, A, B):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if self.kind == "linear":
            return A @ B.T
        return np.exp(-self.gamma * cdist(A, B, "sqeuclidean"))

    def as_dict(self):
        return {"kind": self.kind, "gamma": self.gamma}


@dataclass(frozen=True, eq=False)
class BinaryMachine:
    negative: object  # smaller label, mapped to -1
    positive: object
    support_vectors: np.ndarray
    coef: np.ndarray  # alpha_i * y_i
    bias: float
    converged: bool = True
    iterations: int = 0


@dataclass(frozen=True, eq=False)
class SvmModel:
    machines: list
    classes: np.ndarray
    kernel: Kernel
    C: float
    dim: int

    def decision_values(self, X):
        X, _ = _batch(X, self.dim)
        return np.column_stack(
            [self.kernel(X, m.support_vectors) @ m.coef + m.bias for m in self.machines]
        )


def _pair_problems(y, classes):
    for a, b in combinations(range(classes.size), 2):
        idx = np.nonzero((y == classes[a]) | (y == classes[b]))[0]
        yy = np.where(y[idx] == classes[b], 1.0, -1.0)
        yield a, b, idx, yy


def fit_machines_from_kernel(K, y, classes, C, tol=1e-3):
    """One-vs-one dual solutions on a precomputed training kernel matrix.

    Returns ``(a, b, support_idx, coef, bias, converged, iterations)`` per
    class pair, indices into the rows of ``K``.
    """
    out = []
    for a, b, idx, yy in _pair_problems(y, classes):
        sol = solve_box_qp(K[np.ix_(idx, idx)], yy, C, tol=tol)
        sv = sol.alpha > SUPPORT_EPS
        out.append((a, b, idx[sv], sol.alpha[sv] * yy[sv], sol.bias, sol.converged, sol.iterations))
    return out


def decision_scale(coef, bias):
    """Magnitude bound used to call a decision value zero (exact for |K| <= 1)."""
    return float(np.abs(coef).sum() + abs(bias))


def ovo_vote(decisions, pairs, n_classes, scales=None):
    """One-vs-one voting with the documented tie rules.

    ``decisions`` is (n_queries, n_machines); ``pairs`` lists (neg, pos) class
    codes per machine. A decision within ``ZERO_DECISION_RTOL * scale`` of
    zero casts no vote. Most votes wins, then the largest summed |decision|
    of the machines that voted for the class, then the smallest code.
    """
    nq = decisions.shape[0]
    if scales is not None:
        band = ZERO_DECISION_RTOL * np.asarray(scales, dtype=float)
        decisions = np.where(np.abs(decisions) <= band, 0.0, decisions)
    votes = np.zeros((nq, n_classes))
    strength = np.zeros((nq, n_classes))
    for col, (a, b) in enumerate(pairs):
        f = decisions[:, col]
        pos, neg = f > 0, f < 0
        votes[pos, b] += 1
        votes[neg, a] += 1
        strength[pos, b] += f[pos]
        strength[neg, a] -= f[neg]
    best = votes.max(axis=1, keepdims=True)
    tied = votes == best
    s = np.where(tied, strength, -np.inf)
    s_best = s.max(axis=1, keepdims=True)
    return np.argmax(tied & (s == s_best), axis=1)


def svm_fit(X, y, kernel=None, C=1.0, tol=1e-3):
    """One-vs-one soft-margin SVMs; the smaller label of each pair is -1."""
    X = np.asarray(X, dtype=float)
    y = np.array(_labels(y, X.shape[0]))
    kernel = kernel or Kernel()
    if not C > 0:
        raise DataError("C must be positive")
    classes = np.unique(y)
    if classes.size < 2:
        raise DataError("need >= 2 classes")
    K = kernel(X, X)
    machines = []
    failed = []
    for a, b, sv, coef, bias, conv, its in fit_machines_from_kernel(K, y, classes, C, tol):
        machines.append(BinaryMachine(classes[a], classes[b], X[sv], coef, bias, conv, its))
        if not conv:
            failed.append((classes[a].item(), classes[b].item()))
    if failed:
        warnings.warn(f"SVM dual did not converge for class pairs {failed}", RuntimeWarning, stacklevel=2)
    return SvmModel(machines, classes, kernel, float(C), X.shape[1])


def svm_predict(model, x):
    X, single = _batch(x, model.dim)
    code = {c: i for i, c in enumerate(model.classes.tolist())}
    pairs = [(code[m.negative.item()], code[m.positive.item()]) for m in model.machines]
    scales = [decision_scale(m.coef, m.bias) for m in model.machines]
    out = model.classes[ovo_vote(model.decision_values(X), pairs, model.classes.size, scales)]
    return out[0] if single else out


# ---------------------------------------------------------------------------
# serialization


def _arr(a):
    return np.asarray(a, dtype=float).tolist()


def _label_list(labels):
    return np.asarray(labels).tolist()


def model_to_dict(model):
    if isinstance(model, PcaModel):
        return {"type": "pca", "mean": _arr(model.mean), "components": _arr(model.components),
                "eigenvalues": _arr(model.eigenvalues)}
    if isinstance(model, LdaModel):
        return {"type": "lda", "projection": _arr(model.projection), "classes": _label_list(model.classes),
                "class_means": _arr(model.class_means), "eigenvalues": _arr(model.eigenvalues),
                "singular_within": model.singular_within, "max_d": model.max_d}
    if isinstance(model, KnnModel):
        return {"type": "knn", "k": model.k, "references": _arr(model.references),
                "labels": _label_list(model.labels)}
    if isinstance(model, SvmModel):
        return {
            "type": "svm",
            "kernel": model.kernel.as_dict(),
            "C": model.C,
            "classes": _label_list(model.classes),
            "dim": model.dim,
            "machines": [
                {"negative": m.negative.item(), "positive": m.positive.item(),
                 "support_vectors": _arr(m.support_vectors), "coef": _arr(m.coef), "bias": m.bias,
                 "converged": m.converged, "iterations": m.iterations}
                for m in model.machines
            ],
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(doc):
    kind = doc.get("type")
    if kind == "pca":
        return PcaModel(np.array(doc["mean"]), np.array(doc["components"]), np.array(doc["eigenvalues"]))
    if kind == "lda":
        return LdaModel(np.array(doc["projection"]), np.array(doc["classes"]), np.array(doc["class_means"]),
                        np.array(doc["eigenvalues"]), doc["singular_within"], doc["max_d"])
    if kind == "knn":
        return KnnModel(np.array(doc["references"]), np.array(doc["labels"]), doc["k"])
    if kind == "svm":
        classes = np.array(doc["classes"])
        dim = doc["dim"]
        machines = [
            BinaryMachine(
                classes[classes.tolist().index(m["negative"])],
                classes[classes.tolist().index(m["positive"])],
                np.array(m["support_vectors"], dtype=float).reshape(-1, dim),
                np.array(m["coef"], dtype=float),
                m["bias"], m["converged"], m["iterations"],
            )
            for m in doc["machines"]
        ]
        return SvmModel(machines, classes, Kernel(**doc["kernel"]), doc["C"], dim)
    raise DataError(f"unknown model type {kind!r}")


def save_model(model, path):
    # json writes floats with repr(), which round-trips exactly
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n", encoding="utf-8")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
