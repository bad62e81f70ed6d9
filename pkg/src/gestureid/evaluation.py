"""Scenario splitting, nested cross-validation with grid search, and metrics."""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import classifiers as clf
from .errors import ConfigError, DataError, GestureIdError
from .preprocess import DEFAULT_LENGTH, fit_normalization, normalize_matrices, resample_corpus

log = logging.getLogger(__name__)

MODES = ("paper_faithful", "fold_safe")
CLASSIFIERS = ("lda", "knn", "svm")
DEFAULT_COMPONENTS = 100

LDA_GRID = (3, 5, 10, 15, 20, 25, 30, 35)
KNN_GRID = (1, 2, 3, 4, 5, 7, 10, 20, 30, 40, 50)
SVM_VALUES = tuple(float(v) for v in np.round(np.logspace(-3, 0, 5), 6))


# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class ScenarioSpec:
    """A: one gesture; B: all gestures mixed; C: disjoint train/test gestures."""

    kind: str
    gesture_id: Optional[int] = None
    train_gestures: tuple = ()
    test_gestures: tuple = ()

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind == "A":
            if self.gesture_id is None or not 1 <= int(self.gesture_id) <= 22:
                raise ConfigError(f"scenario A needs a gesture id in 1..22, got {self.gesture_id}")
        elif kind == "C":
            tr = tuple(sorted(int(g) for g in self.train_gestures))
            te = tuple(sorted(int(g) for g in self.test_gestures))
            object.__setattr__(self, "train_gestures", tr)
            object.__setattr__(self, "test_gestures", te)
            if not tr or not te:
                raise ConfigError("scenario C needs non-empty train and test gesture sets")
            if set(tr) & set(te):
                raise ConfigError(f"scenario C gesture sets overlap: {sorted(set(tr) & set(te))}")
        elif kind != "B":
            raise ConfigError(f"unknown scenario kind {self.kind!r}")

    @classmethod
    def scenario_c(cls, gestures, train=None, test=None):
        """Odd gesture ids train, even ids test, unless given explicitly."""
        gestures = sorted(int(g) for g in gestures)
        if train is None:
            train = [g for g in gestures if g % 2 == 1]
        if test is None:
            test = [g for g in gestures if g not in set(train)]
        return cls("C", train_gestures=tuple(train), test_gestures=tuple(test))

    @property
    def label(self):
        return f"A{self.gesture_id}" if self.kind == "A" else self.kind

    def as_dict(self):
        d = {"kind": self.kind}
        if self.kind == "A":
            d["gesture_id"] = int(self.gesture_id)
        if self.kind == "C":
            d["train_gestures"] = list(self.train_gestures)
            d["test_gestures"] = list(self.test_gestures)
        return d


@dataclass(frozen=True)
class GridSpec:
    classifier: str
    points: tuple

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(f"unknown classifier {self.classifier!r}; expected one of {CLASSIFIERS}")
        if not self.points:
            raise ConfigError(f"empty parameter grid for {self.classifier}")
        object.__setattr__(self, "points", tuple(dict(p) for p in self.points))

    @classmethod
    def lda(cls, d_values=LDA_GRID):
        return cls("lda", tuple({"d": int(d)} for d in d_values))

    @classmethod
    def knn(cls, k_values=KNN_GRID):
        return cls("knn", tuple({"k": int(k)} for k in k_values))

    @classmethod
    def svm(cls, c_values=SVM_VALUES, gamma_values=SVM_VALUES):
        return cls("svm", tuple({"C": float(c), "gamma": float(g)} for c in c_values for g in gamma_values))

    @classmethod
    def default(cls, name):
        return getattr(cls, name)()

    def as_dict(self):
        return {"classifier": self.classifier, "points": [dict(p) for p in self.points]}


@dataclass(frozen=True)
class CvSpec:
    outer_folds: int = 4
    inner_folds: int = 4
    seed: int = 0
    leakage_mode: str = "paper_faithful"

    def __post_init__(self):
        mode = self.leakage_mode.replace("-", "_")
        object.__setattr__(self, "leakage_mode", mode)
        if mode not in MODES:
            raise ConfigError(f"unknown leakage mode {self.leakage_mode!r}; expected one of {MODES}")
        if self.outer_folds < 2 or self.inner_folds < 2:
            raise ConfigError("fold counts must be >= 2")

    def as_dict(self):
        return {"outer_folds": self.outer_folds, "inner_folds": self.inner_folds, "seed": self.seed,
                "leakage_mode": self.leakage_mode}


# ---------------------------------------------------------------------------
# folds


def _stratified_assignment(keys, n_folds, rng, what="cell"):
    """Fold id per position; each key's members are shuffled and dealt round-robin,
    with the starting fold rotated across keys so fold sizes stay balanced."""
    fold = np.empty(len(keys), dtype=np.intp)
    cells = {}
    for pos, key in enumerate(keys):
        cells.setdefault(key, []).append(pos)
    offset = 0
    for key in sorted(cells):
        members = np.array(cells[key])
        if members.size < n_folds:
            name = f"(performer {key[0]}, gesture {key[1]})" if isinstance(key, tuple) else str(key)
            raise DataError(f"{what} {name} has {members.size} samples, fewer than {n_folds} folds")
        members = members[rng.permutation(members.size)]
        fold[members] = (offset + np.arange(members.size)) % n_folds
        offset += members.size
    return fold


def split_folds(performers, gestures, n_folds, seed, scenario):
    """(train, test) index arrays per fold over the given samples.

    A: stratified by performer. B: stratified by (performer, gesture).
    C: the train-gesture portion is split by (performer, gesture) and each
    fold trains on all but one part; the test set is always every sample of
    the test gestures. Samples outside the scenario are never used.
    """
    performers = np.asarray(performers)
    gestures = np.asarray(gestures, dtype=int)
    rng = np.random.default_rng(seed)
    n = performers.shape[0]
    if scenario.kind == "A":
        pool = np.nonzero(gestures == scenario.gesture_id)[0]
        keys = [str(performers[i]) for i in pool]
        what = "performer"
    elif scenario.kind == "B":
        pool = np.arange(n)
        keys = [(str(performers[i]), int(gestures[i])) for i in pool]
        what = "cell"
    else:
        pool = np.nonzero(np.isin(gestures, scenario.train_gestures))[0]
        keys = [(str(performers[i]), int(gestures[i])) for i in pool]
        what = "cell"
    if pool.size == 0:
        raise DataError(f"scenario {scenario.label}: no eligible samples")
    fold = _stratified_assignment(keys, n_folds, rng, what)
    if scenario.kind == "C":
        test = np.nonzero(np.isin(gestures, scenario.test_gestures))[0]
        if test.size == 0:
            raise DataError("scenario C: no samples of the test gestures")
        return [(pool[fold != f], test) for f in range(n_folds)]
    return [(pool[fold != f], pool[fold == f]) for f in range(n_folds)]


def _inner_splits(performers, gestures, n_folds, seed, scenario):
    """Inner validation folds over a training set (positions into it).

    For scenario C the validation folds hold out whole gestures, mirroring
    the unseen-gesture test; with fewer train gestures than folds it falls
    back to (performer, gesture) stratification.
    """
    gestures = np.asarray(gestures, dtype=int)
    if scenario.kind == "C":
        gs = np.unique(gestures)
        if gs.size >= n_folds:
            rng = np.random.default_rng(seed)
            shuffled = gs[rng.permutation(gs.size)]
            group = {int(g): i % n_folds for i, g in enumerate(shuffled)}
            fid = np.array([group[int(g)] for g in gestures])
            return [(np.nonzero(fid != f)[0], np.nonzero(fid == f)[0]) for f in range(n_folds)]
        scenario = ScenarioSpec("B")
    elif scenario.kind == "A":
        scenario = ScenarioSpec("A", gesture_id=int(gestures[0])) if gestures.size else scenario
    return split_folds(performers, gestures, n_folds, seed, scenario)


# ---------------------------------------------------------------------------
# metrics


def confusion_matrix(true_labels, predicted_labels, labels=None):
    """Counts with rows = true class, columns = predicted class."""
    t = np.asarray(true_labels)
    p = np.asarray(predicted_labels)
    if t.shape != p.shape:
        raise DataError(f"length mismatch: {t.shape[0]} true vs {p.shape[0]} predicted labels")
    if labels is None:
        labels = np.unique(np.concatenate([t, p]))
    labels = np.asarray(labels)
    index = {v: i for i, v in enumerate(labels.tolist())}
    M = np.zeros((labels.size, labels.size), dtype=np.int64)
    for a, b in zip(t.tolist(), p.tolist()):
        M[index[a], index[b]] += 1
    return M


# ---------------------------------------------------------------------------
# features


class FeatureSource:
    """Normalized, PCA-reduced features for arbitrary fit/apply index sets.

    In ``paper_faithful`` mode normalization and PCA are fitted once on every
    recording and the same matrix is served for any split. In ``fold_safe``
    mode both are refitted on the fit indices of each request.
    """

    def __init__(self, stack, mode="paper_faithful", n_components=DEFAULT_COMPONENTS, layout="time_major"):
        self.stack = stack
        self.mode = mode
        self.n_components = n_components
        self.layout = layout
        self.global_features = None
        self.global_components = None
        if mode == "paper_faithful":
            self.global_features, self.global_components = self._fit_apply(np.arange(stack.shape[0]), None)

    def _fit_apply(self, fit_idx, apply_idx):
        state = fit_normalization(self.stack[fit_idx])
        Z_fit = normalize_matrices(self.stack[fit_idx], state, self.layout)
        n_comp = min(self.n_components, Z_fit.shape[0] - 1, Z_fit.shape[1])
        pca = clf.pca_fit(Z_fit, n_comp)
        X_fit = pca.transform(Z_fit)
        if apply_idx is None:
            return X_fit, n_comp
        X_apply = pca.transform(normalize_matrices(self.stack[apply_idx], state, self.layout))
        return X_fit, X_apply, n_comp

    def features(self, fit_idx, apply_idx):
        """Features of ``fit_idx`` and ``apply_idx`` rows, and the component count used."""
        if self.global_features is not None:
            return self.global_features[fit_idx], self.global_features[apply_idx], self.global_components
        return self._fit_apply(fit_idx, apply_idx)


# ---------------------------------------------------------------------------
# grid search


def _score_grid(name, points, X_tr, y_tr, X_va, y_va):
    """Validation accuracy per grid point (None where the fit failed).

    Work shared between points (LDA eigenproblem, neighbour ordering, kernel
    matrices) is done once; predictions equal separate fit/predict calls.
    """
    scores = [None] * len(points)
    errors = {}
    if name == "lda":
        try:
            model = clf.lda_fit(X_tr, y_tr, d="max")
        except GestureIdError as exc:
            return scores, {i: str(exc) for i in range(len(points))}
        for i, pt in enumerate(points):
            if not 1 <= pt["d"] <= model.max_d:
                errors[i] = f"d={pt['d']} exceeds the achievable maximum {model.max_d}"
                continue
            scores[i] = float(np.mean(clf.lda_predict(model.truncate(pt["d"]), X_va) == y_va))
    elif name == "knn":
        n_ref = X_tr.shape[0]
        ks = [pt["k"] for pt in points]
        k_top = min(max(ks), n_ref)
        ref = clf.knn_fit(X_tr, y_tr, k_top)
        classes, codes = np.unique(y_tr, return_inverse=True)
        nb = clf.knn_neighbors(ref, X_va, k_top)
        for i, k in enumerate(ks):
            if not 1 <= k <= n_ref:
                errors[i] = f"k={k} must lie in 1..{n_ref}"
                continue
            pred = classes[clf.knn_vote(codes[nb[:, :k]], classes.size)]
            scores[i] = float(np.mean(pred == y_va))
    else:
        classes, codes = np.unique(y_tr, return_inverse=True)
        gammas = []
        for pt in points:
            if pt["gamma"] not in gammas:
                gammas.append(pt["gamma"])
        for gamma in gammas:
            try:
                kernel = clf.Kernel("rbf", gamma)
            except GestureIdError as exc:
                for i, pt in enumerate(points):
                    if pt["gamma"] == gamma:
                        errors[i] = str(exc)
                continue
            K_tr = kernel(X_tr, X_tr)
            K_va = kernel(X_va, X_tr)
            for i, pt in enumerate(points):
                if pt["gamma"] != gamma:
                    continue
                if not pt["C"] > 0:
                    errors[i] = "C must be positive"
                    continue
                machines = clf.fit_machines_from_kernel(K_tr, y_tr, classes, pt["C"])
                dec = np.column_stack([K_va[:, sv] @ coef + b for _, _, sv, coef, b, _, _ in machines])
                scales = [clf.decision_scale(coef, b) for _, _, _, coef, b, _, _ in machines]
                pred = classes[clf.ovo_vote(dec, [(a, b) for a, b, *_ in machines], classes.size, scales)]
                scores[i] = float(np.mean(pred == y_va))
    return scores, errors


@dataclass
class GridResult:
    best: dict
    mean_scores: list
    failures: dict = field(default_factory=dict)


# grid failures tend to repeat in every fold; warn about each pattern once
_REPORTED_FAILURES = set()


def grid_search(X, performers, gestures, grid, n_folds, seed, scenario, featurize=None):
    """Pick the grid point with the best mean inner-fold accuracy.

    ``featurize(fit_idx, apply_idx)`` may supply per-fold features (fold-safe
    mode); otherwise the rows of ``X`` are used directly. Failed fits score 0.
    Ties go to the earlier point in grid order.
    """
    performers = np.asarray(performers)
    gestures = np.asarray(gestures)
    points = grid.points
    if len(points) == 1:
        return GridResult(dict(points[0]), [float("nan")])
    splits = _inner_splits(performers, gestures, n_folds, seed, scenario)
    totals = np.zeros(len(points))
    failures = {}
    for tr, va in splits:
        if featurize is None:
            X_tr, X_va = X[tr], X[va]
        else:
            X_tr, X_va, _ = featurize(tr, va)
        scores, errors = _score_grid(grid.classifier, points, X_tr, performers[tr], X_va, performers[va])
        for i, s in enumerate(scores):
            totals[i] += 0.0 if s is None else s
        for i, msg in errors.items():
            failures.setdefault(i, msg)
    mean = totals / len(splits)
    if failures:
        key = (grid.classifier, tuple(sorted(failures)))
        emit = log.debug if key in _REPORTED_FAILURES else log.warning
        _REPORTED_FAILURES.add(key)
        emit(
            "%s grid: %d of %d points failed and scored 0 (e.g. %s: %s)",
            grid.classifier, len(failures), len(points), points[min(failures)], failures[min(failures)],
        )
    if len(failures) == len(points):
        i = min(failures)
        raise DataError(f"every {grid.classifier} grid point failed (e.g. {points[i]}: {failures[i]})")
    best = int(np.argmax(mean))
    return GridResult(dict(points[best]), mean.tolist(), {points[i].__repr__(): m for i, m in failures.items()})


def fit_predict(name, params, X_tr, y_tr, X_te):
    if name == "lda":
        model = clf.lda_fit(X_tr, y_tr, d=params["d"])
        return clf.lda_predict(model, X_te)
    if name == "knn":
        return clf.knn_predict(clf.knn_fit(X_tr, y_tr, params["k"]), X_te)
    if name == "svm":
        model = clf.svm_fit(X_tr, y_tr, clf.Kernel("rbf", params["gamma"]), params["C"])
        return clf.svm_predict(model, X_te)
    raise ConfigError(f"unknown classifier {name!r}")


# ---------------------------------------------------------------------------
# experiment


@dataclass
class ClassifierResult:
    classifier: str
    accuracy: float  # pooled over outer folds: trace / total of the confusion matrix
    mean_fold_accuracy: float
    fold_accuracies: list
    chosen_params: list
    labels: list
    confusion: np.ndarray
    inner_scores: list

    def as_dict(self):
        return {
            "classifier": self.classifier,
            "accuracy": self.accuracy,
            "mean_fold_accuracy": self.mean_fold_accuracy,
            "fold_accuracies": self.fold_accuracies,
            "chosen_params": self.chosen_params,
            "labels": self.labels,
            "confusion": self.confusion.tolist(),
            "inner_scores": self.inner_scores,
        }


@dataclass
class ExperimentReport:
    scenario: ScenarioSpec
    cv: CvSpec
    n_components: list  # components used per outer fold
    folds: list  # (train, test) index lists per outer fold
    results: dict

    @property
    def label(self):
        return self.scenario.label

    def as_dict(self):
        return {
            "scenario": self.scenario.as_dict(),
            "cv": self.cv.as_dict(),
            "n_components": self.n_components,
            "folds": [{"train": tr, "test": te} for tr, te in self.folds],
            "results": {k: v.as_dict() for k, v in self.results.items()},
        }


@dataclass
class PreparedData:
    performers: np.ndarray
    gestures: np.ndarray
    source: FeatureSource


def prepare(corpus, cv, n_components=DEFAULT_COMPONENTS, t=DEFAULT_LENGTH, layout="time_major"):
    """Resample the corpus and, in paper-faithful mode, fit normalization and PCA on all of it."""
    stack = resample_corpus(corpus, t)
    performers = np.array([r.performer_id for r in corpus.recordings])
    gestures = np.array([r.gesture_id for r in corpus.recordings], dtype=int)
    return PreparedData(performers, gestures, FeatureSource(stack, cv.leakage_mode, n_components, layout))


def _fold_featurizer(source, tr):
    def featurize(a, b):
        return source.features(tr[a], tr[b])
    return featurize


def run_prepared(data, scenario, grids, cv):
    performers, gestures, source = data.performers, data.gestures, data.source
    folds = split_folds(performers, gestures, cv.outer_folds, [cv.seed, 0], scenario)
    eligible = np.unique(np.concatenate([np.concatenate([tr, te]) for tr, te in folds]))
    labels = np.unique(performers[eligible])
    if labels.size < 2:
        raise DataError(f"scenario {scenario.label}: need >= 2 performers, found {labels.size}")

    fold_features = []
    for tr, te in folds:
        fold_features.append(source.features(tr, te))

    results = {}
    for grid in grids:
        name = grid.classifier
        confusion = np.zeros((labels.size, labels.size), dtype=np.int64)
        fold_acc, chosen, inner = [], [], []
        for f, ((tr, te), (X_tr, X_te, _)) in enumerate(zip(folds, fold_features)):
            context = f"scenario {scenario.label}, classifier {name}, fold {f + 1}"
            featurize = None if source.global_features is not None else _fold_featurizer(source, tr)
            try:
                gr = grid_search(X_tr, performers[tr], gestures[tr], grid, cv.inner_folds,
                                 [cv.seed, 1, f], scenario, featurize)
                pred = fit_predict(name, gr.best, X_tr, performers[tr], X_te)
            except GestureIdError as exc:
                raise type(exc)(f"{context}: {exc}") from exc
            confusion += confusion_matrix(performers[te], pred, labels)
            fold_acc.append(float(np.mean(pred == performers[te])))
            chosen.append(gr.best)
            inner.append(gr.mean_scores)
        total = int(confusion.sum())
        results[name] = ClassifierResult(
            name,
            float(np.trace(confusion) / total) if total else 0.0,
            float(np.mean(fold_acc)),
            fold_acc,
            chosen,
            labels.tolist(),
            confusion,
            inner,
        )
        log.info("scenario %s %s: accuracy %.4f", scenario.label, name, results[name].accuracy)
    return ExperimentReport(
        scenario,
        cv,
        [int(ff[2]) for ff in fold_features],
        [(tr.tolist(), te.tolist()) for tr, te in folds],
        results,
    )


def run_experiment(corpus, scenario, grids=None, cv=None, n_components=DEFAULT_COMPONENTS,
                   t=DEFAULT_LENGTH, layout="time_major"):
    """Nested CV of each classifier grid on one scenario of ``corpus``."""
    cv = cv or CvSpec()
    grids = grids or [GridSpec.default(c) for c in CLASSIFIERS]
    return run_prepared(prepare(corpus, cv, n_components, t, layout), scenario, grids, cv)


def summarize_scenario_a(reports):
    """Per-gesture accuracies and their mean, per classifier, from scenario A reports."""
    out = {}
    for rep in reports:
        for name, res in rep.results.items():
            out.setdefault(name, {})[rep.scenario.gesture_id] = res.accuracy
    return {name: {"per_gesture": acc, "mean": float(np.mean(list(acc.values())))} for name, acc in out.items()}
