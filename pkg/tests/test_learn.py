from __future__ import annotations

import numpy as np
import pytest

from conftest import make_doc
from eventloc import learn
from eventloc.features import Dataset, FeatureRow
from eventloc.learn.baselines import dictionary_baseline, focus_baseline, nearest_verb_baseline
from eventloc.learn.common import FeatureMismatchError, TrainingError, assign_folds
from eventloc.learn.forest import LEAF, DecisionTree, RandomForestModel, train_random_forest
from eventloc.learn.mlp import MlpModel, MlpParams, fit_params, init_params, loss_and_grad, train_mlp
from eventloc.learn.rfe import rfe_select
from eventloc.learn.svm import rbf_kernel, smo_solve, train_svm_rbf
from eventloc.lexicon import PROVINCE


def blobs(rng, n=100, gap=3.0):
    y = np.arange(n) % 2
    X = rng.normal(size=(n, 2)) * 0.5
    X[y == 1] += gap
    return X, y


def traverse(tree_dict, x):
    """Walk one tree node by node from its dict form."""
    node = 0
    while tree_dict["feature"][node] != LEAF:
        f = tree_dict["feature"][node]
        node = tree_dict["left"][node] if x[f] <= tree_dict["threshold"][node] else tree_dict["right"][node]
    return tree_dict["value"][node]


def kkt_violation(K, y, alpha, b, C):
    """Largest breach of the box-constrained KKT conditions."""
    yf = y * (K @ (alpha * y) + b)
    worst = 0.0
    for a, m in zip(alpha, yf):
        if a <= 0:
            worst = max(worst, 1 - m)
        elif a >= C:
            worst = max(worst, m - 1)
        else:
            worst = max(worst, abs(m - 1))
    return worst


class TestForest:
    def test_matches_explicit_traversal(self):
        rng = np.random.default_rng(3)
        for trial in range(20):
            n, p = rng.integers(5, 51), rng.integers(1, 6)
            X = rng.normal(size=(n, p)).round(1)
            y = rng.integers(0, 2, n)
            y[:2] = [0, 1]
            model = train_random_forest((X, y), n_trees=int(rng.integers(1, 6)), seed=trial)
            trees = [t.to_dict() for t in model.trees]
            expected = []
            for x in X:
                total = 0.0
                for t in trees:
                    total += traverse(t, x)
                expected.append(total / len(trees))
            assert model.predict_proba(X).tolist() == expected

    def test_separable_blobs(self):
        X, y = blobs(np.random.default_rng(0))
        centroids = np.array([X[y == k].mean(0) for k in (0, 1)])
        nearest = np.argmin(((X[:, None, :] - centroids) ** 2).sum(-1), axis=1)
        assert np.mean(nearest == y) == 1.0  # the oracle separates the blobs
        model = train_random_forest((X, y), n_trees=25, seed=1)
        assert np.mean((model.predict_proba(X) > 0.5) == y) >= 0.95

    def test_single_stump(self):
        X = np.array([[0.0], [0.0], [0.0], [1.0], [1.0], [1.0]])
        y = np.array([0, 0, 0, 1, 1, 1])
        model = train_random_forest((X, y), n_trees=1, seed=0)
        tree = model.trees[0]
        assert tree.n_nodes == 3 and tree.feature[0] == 0
        assert model.predict_proba(np.array([[0.0], [1.0]])).tolist() == [0.0, 1.0]

    def test_same_seed_same_trees(self):
        X, y = blobs(np.random.default_rng(1), n=40)
        a = train_random_forest((X, y), n_trees=5, seed=9)
        b = train_random_forest((X, y), n_trees=5, seed=9)
        assert learn.model_to_json(a) == learn.model_to_json(b)

    def test_jobs_do_not_change_the_forest(self):
        X, y = blobs(np.random.default_rng(2), n=30)
        a = train_random_forest((X, y), n_trees=5, seed=4, n_jobs=1)
        b = train_random_forest((X, y), n_trees=5, seed=4, n_jobs=2)
        assert learn.model_to_json(a) == learn.model_to_json(b)

    def test_two_tree_vote(self):
        leaf = lambda v: DecisionTree(np.array([LEAF]), np.zeros(1), np.array([-1]), np.array([-1]), np.array([v]))
        model = RandomForestModel([leaf(1.0), leaf(0.0)], ["x"], 2, 1)
        assert learn.predict_proba(model, {"x": 3.0}) == 0.5

    def test_one_class(self):
        with pytest.raises(TrainingError):
            train_random_forest((np.zeros((4, 1)), np.zeros(4, dtype=int)))


class TestSvm:
    def test_kkt_and_separable_accuracy(self):
        rng = np.random.default_rng(11)
        for trial in range(50):
            n, p = int(rng.integers(6, 31)), int(rng.integers(1, 4))
            X = rng.normal(size=(n, p))
            separable = trial % 2 == 0
            if separable:
                w = rng.normal(size=p)
                score = X @ w
                keep = np.abs(score) > 0.3
                X, score = X[keep], score[keep]
                y = (score > 0).astype(int)
                if y.min() == y.max():
                    continue
                C = 1e3
            else:
                y = rng.integers(0, 2, len(X))
                y[:2] = [0, 1]
                C = 1.0
            gamma = 1.0 / p
            model = train_svm_rbf((X, y), C=C, gamma=gamma, tol=1e-3)
            K = rbf_kernel(X, X, gamma)
            ys = np.where(y == 1, 1.0, -1.0)
            result = smo_solve(K, ys, C, tol=1e-3)
            assert result.violation < 1e-3
            assert kkt_violation(K, ys, result.alpha, -result.rho, C) <= 1e-3 + 1e-9
            assert abs(result.alpha @ ys) < 1e-9
            if separable:
                assert np.all((model.decision_function(X) > 0) == (y == 1))

    def test_dual_objective_never_drops(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(40, 3))
        y = np.where(rng.random(40) > 0.5, 1.0, -1.0)
        result = smo_solve(rbf_kernel(X, X, 0.5), y, 1.0, trace=True)
        steps = np.diff(result.objective)
        assert len(steps) > 0 and np.all(steps >= -1e-12)

    def test_xor_against_direct_solve(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        y = np.array([0, 0, 1, 1])
        gamma, C = 2.0, 100.0
        model = train_svm_rbf((X, y), C=C, gamma=gamma, tol=1e-6)
        # all four points sit on the margin: solve [K 1; 1' 0][beta; b] = [y; 0]
        K = rbf_kernel(X, X, gamma)
        ys = np.where(y == 1, 1.0, -1.0)
        A = np.block([[K, np.ones((4, 1))], [np.ones((1, 4)), np.zeros((1, 1))]])
        sol = np.linalg.solve(A, np.append(ys, 0.0))
        beta, b = sol[:4], sol[4]
        assert np.all(beta * ys > 0) and np.all(beta * ys < C)
        assert model.decision_function(X) == pytest.approx(K @ beta + b, abs=1e-5)
        assert np.all((model.decision_function(X) > 0) == (y == 1))

    def test_conflicting_duplicates(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([0, 1, 0, 1])
        model = train_svm_rbf((X, y))
        acc = np.mean((model.predict_proba(X) > 0.5) == y)
        assert acc < 1.0
        assert np.all((model.predict_proba(X) >= 0) & (model.predict_proba(X) <= 1))


class TestMlp:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        eps = 1e-5
        for _ in range(100):
            n_in, hidden, n = int(rng.integers(1, 6)), int(rng.integers(1, 6)), int(rng.integers(1, 12))
            X = rng.normal(size=(n, n_in))
            y = rng.integers(0, 2, n).astype(float)
            decay = float(rng.choice([0.0, 0.01, 0.5]))
            params = init_params(n_in, hidden, rng, scale=1.0)
            _, grad = loss_and_grad(params, X, y, decay)
            theta = params.flat()
            numeric = np.zeros_like(theta)
            for k in range(len(theta)):
                up, down = theta.copy(), theta.copy()
                up[k] += eps
                down[k] -= eps
                lu, _ = loss_and_grad(MlpParams.unflat(up, n_in, hidden), X, y, decay)
                ld, _ = loss_and_grad(MlpParams.unflat(down, n_in, hidden), X, y, decay)
                numeric[k] = (lu - ld) / (2 * eps)
            analytic = grad.flat()
            rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
            assert rel < 1e-4

    def test_and_function(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 0, 0, 1])
        model = train_mlp((X, y), hidden=(3,), decay=(0.0,), epochs=3000, seed=1)
        assert np.all((model.predict_proba(X) > 0.5) == y)

    def test_decay_shrinks_weights(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(40, 3))
        y = (X[:, 0] > 0).astype(float)
        y[:10] = 1.0
        free = fit_params(X, y, 4, 0.0, epochs=1500, learning_rate=0.1)
        tight = fit_params(X, y, 4, 10.0, epochs=1500, learning_rate=0.1)
        norm = lambda p: np.sum(p.W1 ** 2) + np.sum(p.w2 ** 2)
        assert norm(tight) < 0.01 * norm(free)
        model = MlpModel(tight, ["a", "b", "c"], 4, 10.0)
        assert model.predict_proba(X) == pytest.approx(np.full(40, y.mean()), abs=0.05)

    def test_zero_weights_give_half(self):
        params = MlpParams(np.zeros((2, 3)), np.zeros(2), np.zeros(2), 0.0)
        model = MlpModel(params, ["a", "b", "c"], 2, 0.0)
        assert learn.predict_proba(model, {"a": 1.0, "b": -2.0, "c": 5.0}) == 0.5

    def test_grid_search_records_scores(self):
        X, y = blobs(np.random.default_rng(0), n=30)
        model = train_mlp((X, y), hidden=(2, 3), decay=(0.0, 0.1), epochs=200, seed=0)
        assert len(model.validation) == 4
        assert model.hidden in (2, 3)


def _dataset(X, y, groups=None):
    groups = groups if groups is not None else [f"s{i}" for i in range(len(y))]
    names = [f"f{j}" for j in range(X.shape[1])]
    rows = [FeatureRow(g, f"loc{i}", int(t), dict(zip(names, map(float, x))))
            for i, (g, x, t) in enumerate(zip(groups, X, y))]
    return Dataset(rows, names)


class TestRfe:
    def test_noise_dropped_first(self):
        rng = np.random.default_rng(7)
        y = rng.integers(0, 2, 90)
        informative = y + rng.normal(scale=0.3, size=90)
        noise = rng.normal(size=90)
        subset = rfe_select(_dataset(np.column_stack([noise, informative]), y), n_trees=30, seed=1)
        assert subset.elimination_order == ["f0"]
        assert subset.retained == ["f1"]
        assert sorted(subset.accuracy_by_size) == [1, 2]

    def test_identical_features(self):
        x = np.repeat([0.0, 1.0], 15)
        y = x.astype(int)
        subset = rfe_select(_dataset(np.column_stack([x, x, x]), y), n_trees=10)
        assert len(subset.retained) == 1
        assert set(subset.accuracy_by_size.values()) == {1.0}
        assert sorted(subset.accuracy_by_size) == [1, 2, 3]

    def test_grouped_folds(self):
        groups = ["a", "a", "b", "c", "c", "d"]
        folds = assign_folds(groups, 2, np.random.default_rng(0))
        assert set(folds) == {"a", "b", "c", "d"}
        assert sorted(folds.values()) == [0, 0, 1, 1]


class TestPredictAndSerialize:
    @pytest.mark.parametrize("model_type,params", [
        ("rforest", {"n_trees": 7, "seed": 2}),
        ("svm", {"C": 2.0}),
        ("mlp", {"hidden": (3,), "decay": (0.01,), "epochs": 300, "seed": 2}),
    ])
    def test_round_trip(self, tmp_path, model_type, params):
        X, y = blobs(np.random.default_rng(8), n=30)
        data = _dataset(X, y)
        model = learn.train(model_type, data, **params)
        learn.save_model(model, tmp_path / "m.json")
        again = learn.load_model(tmp_path / "m.json")
        assert type(again) is type(model)
        assert np.array_equal(again.predict_proba(X), model.predict_proba(X))
        assert learn.model_to_json(again) == learn.model_to_json(model)
        proba, pred = learn.predict_rows(again, data.rows, 0.3)
        assert np.array_equal(pred, (proba > 0.3).astype(int))

    def test_missing_feature(self):
        X, y = blobs(np.random.default_rng(8), n=20)
        model = learn.train("svm", _dataset(X, y))
        with pytest.raises(FeatureMismatchError, match="f1"):
            learn.predict_proba(model, {"f0": 1.0})

    def test_unknown_model(self):
        with pytest.raises(TrainingError):
            learn.train("knn", None)

    def test_bad_version(self):
        with pytest.raises(ValueError):
            learn.model_from_json('{"version": 99, "model_type": "svm", "params": {}, "payload": {}}')


class TestBaselines:
    def test_dictionary_half_positive(self):
        labels = [1] * 314 + [0] * 300
        pred = dictionary_baseline(labels)
        assert np.mean(np.array(pred) == np.array(labels)) == pytest.approx(0.51, abs=0.01)

    def test_dictionary_extremes(self):
        assert np.mean(np.array(dictionary_baseline([1, 1])) == 1) == 1.0
        assert np.mean(np.array(dictionary_baseline([0, 0, 0])) == 0) == 0.0

    def test_nearest_verb_picks_dateline(self):
        # dateline location right before the verb, true location far away
        doc = make_doc("dateline_first", [["beijing", "MONTH", "NUMERAL", "SOURCE", "ACTOR", "ACTION-VERB",
                                "outsid", "ACTOR", "x", "x", "x", "x", "in", "sub-shandong"]],
                       [("beijing", PROVINCE, 0, 0), ("shandong", "subprovince", 0, 13)])
        assert nearest_verb_baseline(doc) == "beijing"

    def test_nearest_verb_single_and_tie(self):
        single = make_doc("a", [["x", "hubei"]], [("hubei", PROVINCE, 0, 1)])
        assert nearest_verb_baseline(single) == "hubei"
        tie = make_doc("b", [["hunan", "ACTION-VERB", "hubei"]],
                       [("hunan", PROVINCE, 0, 0), ("hubei", PROVINCE, 0, 2)])
        assert nearest_verb_baseline(tie) == "hunan"

    def test_nearest_verb_crosses_sentences(self):
        doc = make_doc("c", [["hunan", "x", "x"], ["ACTION-VERB"], ["x", "x", "x", "x", "hubei"]],
                       [("hunan", PROVINCE, 0, 0), ("hubei", PROVINCE, 2, 4)])
        assert nearest_verb_baseline(doc) == "hunan"

    def test_focus(self, railway_doc):
        assert focus_baseline(railway_doc) == "heilongjiang"
        tie = make_doc("t", [["hunan"], ["hubei"]], [("hunan", PROVINCE, 0, 0), ("hubei", PROVINCE, 1, 0)])
        assert focus_baseline(tie) == "hunan"
        single = make_doc("s", [["hubei"]], [("hubei", PROVINCE, 0, 0)])
        assert focus_baseline(single) == "hubei"

    def test_no_mentions(self):
        with pytest.raises(ValueError):
            focus_baseline(make_doc("e", [["x"]]))
