import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import blobs
from gestureid import classifiers as clf
from gestureid.dataset import SyntheticSpec, generate_synthetic
from gestureid.errors import ConfigError, DataError
from gestureid.evaluation import (CvSpec, FeatureSource, GridSpec, ScenarioSpec, _score_grid, confusion_matrix,
                                  fit_predict, grid_search, run_experiment, split_folds)
from gestureid.preprocess import resample_corpus


def _labels(n_perf, n_gest, reps):
    performers = np.repeat([f"p{i}" for i in range(n_perf)], n_gest * reps)
    gestures = np.tile(np.repeat(np.arange(1, n_gest + 1), reps), n_perf)
    return performers, gestures


# ---------------------------------------------------------------- specs


def test_scenario_validation():
    with pytest.raises(ConfigError):
        ScenarioSpec("A", gesture_id=23)
    with pytest.raises(ConfigError, match="overlap"):
        ScenarioSpec("C", train_gestures=(1, 2), test_gestures=(2, 3))
    with pytest.raises(ConfigError):
        ScenarioSpec("C", train_gestures=(1,), test_gestures=())
    assert ScenarioSpec.scenario_c(range(1, 7)).train_gestures == (1, 3, 5)


def test_default_grids():
    assert [p["d"] for p in GridSpec.lda().points] == [3, 5, 10, 15, 20, 25, 30, 35]
    assert [p["k"] for p in GridSpec.knn().points] == [1, 2, 3, 4, 5, 7, 10, 20, 30, 40, 50]
    svm = GridSpec.svm().points
    assert len(svm) == 25
    assert min(p["C"] for p in svm) == 0.001 and max(p["gamma"] for p in svm) == 1.0


def test_cv_spec_validation():
    assert CvSpec(leakage_mode="fold-safe").leakage_mode == "fold_safe"
    with pytest.raises(ConfigError):
        CvSpec(outer_folds=1)
    with pytest.raises(ConfigError):
        CvSpec(leakage_mode="leaky")


# ---------------------------------------------------------------- folds


def test_scenario_a_stratified_counting():
    performers, gestures = _labels(2, 1, 4)
    folds = split_folds(performers, gestures, 4, 0, ScenarioSpec("A", gesture_id=1))
    for tr, te in folds:
        assert len(te) == 2
        assert sorted(performers[te]) == ["p0", "p1"]


def test_scenario_b_each_fold_holds_every_cell():
    performers, gestures = _labels(3, 4, 8)
    for tr, te in split_folds(performers, gestures, 4, 1, ScenarioSpec("B")):
        cells = {}
        for i in te:
            cells[(performers[i], gestures[i])] = cells.get((performers[i], gestures[i]), 0) + 1
        assert len(cells) == 12 and set(cells.values()) == {2}


def test_scenario_c_purity():
    performers, gestures = _labels(3, 22, 4)
    spec = ScenarioSpec("C", train_gestures=range(1, 12), test_gestures=range(12, 23))
    folds = split_folds(performers, gestures, 4, 0, spec)
    test = folds[0][1]
    for tr, te in folds:
        assert not set(gestures[te]) & set(gestures[tr])
        assert set(gestures[tr]) <= set(range(1, 12))
        np.testing.assert_array_equal(te, test)


def test_folds_deterministic_in_seed():
    performers, gestures = _labels(3, 3, 5)
    a = split_folds(performers, gestures, 4, 9, ScenarioSpec("B"))
    b = split_folds(performers, gestures, 4, 9, ScenarioSpec("B"))
    c = split_folds(performers, gestures, 4, 10, ScenarioSpec("B"))
    assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))
    assert not all(np.array_equal(x[1], y[1]) for x, y in zip(a, c))


def test_small_cell_error_names_the_cell():
    performers, gestures = _labels(2, 2, 4)
    keep = ~((performers == "p1") & (gestures == 2) & (np.arange(16) % 4 == 0))
    with pytest.raises(DataError, match=r"cell \(performer p1, gesture 2\) has 3 samples"):
        split_folds(performers[keep], gestures[keep], 4, 0, ScenarioSpec("B"))


@given(st.integers(2, 4), st.integers(1, 4), st.integers(2, 7), st.integers(2, 5), st.integers(0, 1000),
       st.sampled_from(["A", "B"]))
def test_property_fold_partition(n_perf, n_gest, reps, n_folds, seed, kind):
    if reps < n_folds:
        return
    performers, gestures = _labels(n_perf, n_gest, reps)
    scenario = ScenarioSpec("A", gesture_id=1) if kind == "A" else ScenarioSpec("B")
    folds = split_folds(performers, gestures, n_folds, seed, scenario)
    eligible = np.nonzero(gestures == 1)[0] if kind == "A" else np.arange(len(gestures))
    tests = np.concatenate([te for _, te in folds])
    assert sorted(tests.tolist()) == eligible.tolist()
    for tr, te in folds:
        assert not set(tr) & set(te)
        assert sorted(np.concatenate([tr, te]).tolist()) == eligible.tolist()


# ---------------------------------------------------------------- confusion


def test_confusion_perfect_and_single_column():
    y = np.array([0, 1, 2, 1])
    np.testing.assert_array_equal(confusion_matrix(y, y), np.diag([1, 2, 1]))
    M = confusion_matrix(y, np.zeros(4, dtype=int), labels=[0, 1, 2])
    assert np.count_nonzero(M.sum(axis=0)) == 1 and M[:, 0].sum() == 4


def test_confusion_matches_counting_oracle(rng):
    t = rng.integers(0, 3, 300)
    p = rng.integers(0, 3, 300)
    M = confusion_matrix(t, p, labels=[0, 1, 2])
    for i in range(3):
        for j in range(3):
            assert M[i, j] == sum(1 for a, b in zip(t, p) if a == i and b == j)


def test_confusion_length_mismatch():
    with pytest.raises(DataError, match="length mismatch"):
        confusion_matrix([0, 1], [0])


# ---------------------------------------------------------------- grid search


def test_single_point_grid_returned():
    X = np.zeros((8, 2))
    performers, gestures = _labels(2, 1, 4)
    res = grid_search(X, performers, gestures, GridSpec.knn([3]), 4, 0, ScenarioSpec("B"))
    assert res.best == {"k": 3}


def test_grid_prefers_smoothing_k_on_noisy_blobs():
    rng = np.random.default_rng(3)
    X, y = blobs(rng, 2, 60, 2, spread=1.0, scale=1.0)
    flip = rng.random(y.size) < 0.25
    y = np.where(flip, 1 - y, y)
    performers = np.array([f"p{v}" for v in y])
    gestures = np.ones(y.size, dtype=int)
    scen = ScenarioSpec("B")
    res = grid_search(X, performers, gestures, GridSpec.knn([1, 5]), 4, 0, scen)
    # exhaustive re-evaluation of both points on the same inner folds
    folds = split_folds(performers, gestures, 4, 0, scen)
    score = {}
    for k in (1, 5):
        accs = [np.mean(fit_predict("knn", {"k": k}, X[tr], performers[tr], X[va]) == performers[va])
                for tr, va in folds]
        score[k] = np.mean(accs)
    assert score[5] > score[1]
    assert res.best == {"k": 5}
    np.testing.assert_allclose(res.mean_scores, [score[1], score[5]])


def test_lda_grid_rank_bound(rng):
    X, y = blobs(rng, 4, 24, 12)
    performers = np.array([f"p{v}" for v in y])
    res = grid_search(X, performers, np.ones(y.size, dtype=int), GridSpec.lda(), 4, 0, ScenarioSpec("B"))
    assert res.best["d"] <= 3
    assert len(res.failures) == 7


@pytest.mark.parametrize("name", ["lda", "knn", "svm"])
def test_shared_grid_scoring_equals_separate_fits(rng, name):
    X, y = blobs(rng, 3, 20, 5, spread=1.5)
    Xv = rng.normal(0, 2, size=(40, 5))
    yv = rng.integers(0, 3, 40)
    grid = {"lda": GridSpec.lda([1, 2]), "knn": GridSpec.knn([1, 3, 8]),
            "svm": GridSpec.svm([0.01, 1.0], [0.05, 0.5])}[name]
    scores, errors = _score_grid(name, grid.points, X, y, Xv, yv)
    assert not errors
    for pt, s in zip(grid.points, scores):
        assert s == np.mean(fit_predict(name, pt, X, y, Xv) == yv)


# ---------------------------------------------------------------- experiments


@pytest.fixture(scope="module")
def tiny_corpus():
    return generate_synthetic(SyntheticSpec(performer_count=3, gesture_count=4, seed=5, style_separation=1.0))


def test_report_consistency(tiny_corpus):
    grids = [GridSpec.lda([1, 2]), GridSpec.knn([1, 3]), GridSpec.svm([0.1, 1.0], [0.01, 0.1])]
    rep = run_experiment(tiny_corpus, ScenarioSpec("B"), grids, CvSpec(seed=1), n_components=20, t=40)
    counts = {p: sum(r.performer_id == p for r in tiny_corpus.recordings) for p in tiny_corpus.performers}
    for res in rep.results.values():
        M = res.confusion
        assert res.accuracy == np.trace(M) / M.sum()
        assert M.sum(axis=1).tolist() == [counts[p] for p in res.labels]
        assert len(res.chosen_params) == 4


def test_report_is_deterministic(tiny_corpus):
    grids = [GridSpec.knn([1, 3]), GridSpec.svm([0.1], [0.01, 0.1])]
    a = run_experiment(tiny_corpus, ScenarioSpec("B"), grids, CvSpec(seed=2), n_components=15, t=30)
    b = run_experiment(tiny_corpus, ScenarioSpec("B"), grids, CvSpec(seed=2), n_components=15, t=30)
    assert a.as_dict() == b.as_dict()


def test_scenario_a_and_c_run(tiny_corpus):
    grids = [GridSpec.knn([1, 3])]
    a = run_experiment(tiny_corpus, ScenarioSpec("A", gesture_id=2), grids, CvSpec(), n_components=10, t=30)
    assert a.results["knn"].confusion.sum() == 30
    c = run_experiment(tiny_corpus, ScenarioSpec.scenario_c(tiny_corpus.gestures), grids,
                       CvSpec(leakage_mode="fold_safe"),
                       n_components=10, t=30)
    # every outer fold tests all recordings of gestures 2 and 4
    assert c.results["knn"].confusion.sum() == 4 * 60


def test_zero_separation_is_chance():
    corpus = generate_synthetic(SyntheticSpec(performer_count=4, gesture_count=4, seed=11, style_separation=0.0))
    rep = run_experiment(corpus, ScenarioSpec("B"), [GridSpec.knn([1, 5, 10])], CvSpec(), n_components=20, t=40)
    n = len(corpus)
    sigma = np.sqrt(0.25 * 0.75 / n)
    assert abs(rep.results["knn"].accuracy - 0.25) <= 3 * sigma


def test_errors_carry_context(tiny_corpus):
    with pytest.raises(DataError, match="scenario B, classifier knn, fold 1"):
        run_experiment(tiny_corpus, ScenarioSpec("B"), [GridSpec.knn([500])], CvSpec(), n_components=10, t=30)


def test_fold_safe_has_no_leakage(tiny_corpus):
    stack = resample_corpus(tiny_corpus, 30)
    performers = np.array([r.performer_id for r in tiny_corpus.recordings])
    gestures = np.array([r.gesture_id for r in tiny_corpus.recordings])
    tr, te = split_folds(performers, gestures, 4, 0, ScenarioSpec("B"))[0]
    src = FeatureSource(stack, "fold_safe", 20)
    X_tr, _, _ = src.features(tr, te)
    perturbed = stack.copy()
    perturbed[te[0]] += 100.0
    X_tr2, _, _ = FeatureSource(perturbed, "fold_safe", 20).features(tr, te)
    np.testing.assert_array_equal(X_tr, X_tr2)
    B1, W1, _, _ = clf.scatter_matrices(X_tr, performers[tr])
    B2, W2, _, _ = clf.scatter_matrices(X_tr2, performers[tr])
    np.testing.assert_array_equal(B1, B2)
    np.testing.assert_array_equal(W1, W2)
    # the paper-faithful mode does see the perturbation
    X_pf, _, _ = FeatureSource(stack, "paper_faithful", 20).features(tr, te)
    X_pf2, _, _ = FeatureSource(perturbed, "paper_faithful", 20).features(tr, te)
    assert not np.array_equal(X_pf, X_pf2)


def test_all_points_failing_is_an_error(rng):
    X, y = blobs(rng, 3, 12, 6)
    performers = np.array([f"p{v}" for v in y])
    with pytest.raises(DataError, match="every lda grid point failed"):
        grid_search(X, performers, np.ones(y.size, dtype=int), GridSpec.lda([3, 5]), 4, 0, ScenarioSpec("B"))
