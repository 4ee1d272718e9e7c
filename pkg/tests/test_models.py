import json
import math

import numpy as np
import pytest

from bfrb.errors import NonFiniteFeatureError, SchemaMismatchError, SingleClassInputError
from bfrb.models import (
    DecisionTree,
    ModelConfig,
    best_split,
    load_model,
    logloss_and_grad,
    train,
    train_gradient_boost,
    train_logistic,
    train_random_forest,
)

FEATS2 = ["f0", "f1"]


def separable_data(n=40, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = (X[:, 0] > 0).astype(np.int64)
    X[:, 0] += np.where(y == 1, 1.0, -1.0)  # widen the margin
    return X, y


def exhaustive_best_split(X, y):
    """Independent oracle: enumerate all (feature, midpoint threshold) pairs."""
    n = X.shape[0]
    best_score, best = math.inf, None

    def gini(labels):
        if len(labels) == 0:
            return 0.0
        p = sum(labels) / len(labels)
        return 1.0 - p * p - (1.0 - p) * (1.0 - p)

    for j in range(X.shape[1]):
        values = sorted(set(X[:, j].tolist()))
        for a, b in zip(values, values[1:]):
            thr = (a + b) / 2.0
            left = [int(y[i]) for i in range(n) if X[i, j] <= thr]
            right = [int(y[i]) for i in range(n) if X[i, j] > thr]
            score = len(left) * gini(left) + len(right) * gini(right)
            if score < best_score - 1e-12:  # strict improvement = documented tie-break
                best_score = score
                best = (j, thr)
    return best


class TestLogistic:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            n, p = int(rng.integers(5, 30)), int(rng.integers(1, 8))
            X = rng.normal(size=(n, p))
            y = rng.integers(0, 2, size=n).astype(np.float64)
            w = rng.normal(size=p)
            b = float(rng.normal())
            l2 = 1e-3
            loss, grad_w, grad_b = logloss_and_grad(w, b, X, y, l2)
            h = 1e-6
            for k in range(p):
                wp, wm = w.copy(), w.copy()
                wp[k] += h
                wm[k] -= h
                num = (logloss_and_grad(wp, b, X, y, l2)[0]
                       - logloss_and_grad(wm, b, X, y, l2)[0]) / (2 * h)
                assert grad_w[k] == pytest.approx(num, rel=1e-5, abs=1e-8)
            num_b = (logloss_and_grad(w, b + h, X, y, l2)[0]
                     - logloss_and_grad(w, b - h, X, y, l2)[0]) / (2 * h)
            assert grad_b == pytest.approx(num_b, rel=1e-5, abs=1e-8)

    def test_single_class_raises(self):
        X = np.ones((5, 2))
        with pytest.raises(SingleClassInputError):
            train_logistic(X, np.ones(5, dtype=int), FEATS2)

    def test_zero_model_scores_half(self):
        X, y = separable_data()
        model = train_logistic(X, y, FEATS2, params={"max_iter": 0})
        assert np.all(model.predict_scores(X) == 0.5)

    def test_learns_separable_data(self):
        X, y = separable_data()
        model = train_logistic(X, y, FEATS2)
        scores = model.predict_scores(X)
        assert np.mean((scores >= 0.5) == (y == 1)) == 1.0
        assert np.all((scores >= 0) & (scores <= 1))

    def test_scores_monotone_in_linear_score(self):
        X, y = separable_data()
        model = train_logistic(X, y, FEATS2)
        z = X @ model.weights + model.intercept
        order = np.argsort(z)
        assert np.all(np.diff(model.predict_scores(X)[order]) >= 0)

    def test_importance_is_abs_coefficient(self):
        X, y = separable_data()
        model = train_logistic(X, y, FEATS2)
        report = model.feature_importances()
        assert report.importances["f0"] == abs(float(model.weights[0]))
        assert report.importances["f0"] == max(report.importances.values())

    def test_deterministic(self):
        X, y = separable_data()
        a = train_logistic(X, y, FEATS2)
        b = train_logistic(X, y, FEATS2)
        np.testing.assert_array_equal(a.weights, b.weights)
        assert a.intercept == b.intercept

    def test_nan_rejected(self):
        X, y = separable_data()
        X[0, 0] = np.nan
        with pytest.raises(NonFiniteFeatureError):
            train_logistic(X, y, FEATS2)

    def test_xor_not_separable(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1, 1, 0])
        model = train_logistic(X, y, FEATS2)
        acc = np.mean((model.predict_scores(X) >= 0.5) == (y == 1))
        assert acc <= 0.75


class TestDecisionTree:
    def test_split_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(4, 13))
            p = int(rng.integers(1, 4))
            X = np.round(rng.normal(size=(n, p)), 2)
            y = rng.integers(0, 2, size=n)
            if len(set(y.tolist())) < 2:
                continue
            expected = exhaustive_best_split(X, y)
            actual = best_split(X, y, range(p))
            assert actual == expected

    def test_xor_depth2(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1, 1, 0])
        tree = DecisionTree(max_depth=2).fit(X, y)
        np.testing.assert_array_equal(tree.predict(X), y)

    def test_pure_node_stops(self):
        X = np.array([[1.0], [2.0], [3.0]])
        y = np.array([1, 1, 1])
        tree = DecisionTree().fit(X, y)
        assert tree.root.feature == -1
        assert tree.root.value == 1.0


class TestRandomForest:
    def test_separable_training_accuracy(self):
        X, y = separable_data()
        model = train_random_forest(X, y, FEATS2, params={"n_trees": 25}, seed=0)
        assert np.mean((model.predict_scores(X) >= 0.5) == (y == 1)) == 1.0

    def test_scores_in_unit_interval(self):
        X, y = separable_data()
        model = train_random_forest(X, y, FEATS2, params={"n_trees": 10}, seed=0)
        scores = model.predict_scores(X)
        assert np.all((scores >= 0) & (scores <= 1))

    def test_all_trees_positive_scores_one(self):
        X = np.vstack([np.full((10, 2), -1.0), np.full((10, 2), 1.0)])
        y = np.array([0] * 10 + [1] * 10)
        model = train_random_forest(X, y, FEATS2, params={"n_trees": 10}, seed=0)
        assert np.all(model.predict_scores(np.full((3, 2), 1.0)) == 1.0)

    def test_single_tree_no_bootstrap_equals_decision_tree(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(60, 3))
        y = (X[:, 1] + 0.3 * rng.normal(size=60) > 0).astype(np.int64)
        forest = train_random_forest(
            X, y, ["a", "b", "c"],
            params={"n_trees": 1, "bootstrap": False, "max_features": "all"},
            seed=0,
        )
        tree = DecisionTree(max_depth=8, min_samples_split=2).fit(X, y)
        grid = rng.normal(size=(200, 3))
        np.testing.assert_array_equal(
            forest.predict_scores(grid) >= 0.5, tree.predict(grid) == 1
        )

    def test_deterministic_given_seed(self):
        X, y = separable_data()
        a = train_random_forest(X, y, FEATS2, params={"n_trees": 8}, seed=5)
        b = train_random_forest(X, y, FEATS2, params={"n_trees": 8}, seed=5)
        assert a.to_payload() == b.to_payload()

    def test_importances_sum_to_one(self):
        X, y = separable_data()
        model = train_random_forest(X, y, FEATS2, params={"n_trees": 10}, seed=0)
        total = sum(model.feature_importances().importances.values())
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_informative_feature_dominates(self):
        rng = np.random.default_rng(11)
        n = 300
        X = rng.normal(size=(n, 4))
        y = (X[:, 0] > 0).astype(np.int64)  # f0 informative, f1-f3 pure noise
        model = train_random_forest(
            X, y, ["f0", "f1", "f2", "f3"], params={"n_trees": 30}, seed=2
        )
        assert model.feature_importances().importances["f0"] > 0.9
        # permutation check: shuffling f0 destroys accuracy, shuffling noise does not
        base_acc = np.mean((model.predict_scores(X) >= 0.5) == (y == 1))
        X_perm = X.copy()
        X_perm[:, 0] = rng.permutation(X_perm[:, 0])
        perm_acc = np.mean((model.predict_scores(X_perm) >= 0.5) == (y == 1))
        assert base_acc - perm_acc > 0.3
        X_noise = X.copy()
        X_noise[:, 2] = rng.permutation(X_noise[:, 2])
        noise_acc = np.mean((model.predict_scores(X_noise) >= 0.5) == (y == 1))
        assert abs(base_acc - noise_acc) < 0.05

    def test_schema_mismatch(self):
        X, y = separable_data()
        model = train_random_forest(X, y, FEATS2, params={"n_trees": 5}, seed=0)
        with pytest.raises(SchemaMismatchError):
            model.predict_scores(np.ones((3, 5)))


class TestGradientBoost:
    def test_fits_separable_data(self):
        X, y = separable_data()
        model = train_gradient_boost(X, y, FEATS2, params={"n_trees": 30})
        assert np.mean((model.predict_scores(X) >= 0.5) == (y == 1)) == 1.0

    def test_base_score_is_log_odds(self):
        X, y = separable_data()
        model = train_gradient_boost(X, y, FEATS2, params={"n_trees": 1})
        base_rate = float(np.mean(y))
        assert model.base_score == pytest.approx(math.log(base_rate / (1 - base_rate)))

    def test_single_class_raises(self):
        with pytest.raises(SingleClassInputError):
            train_gradient_boost(np.ones((5, 2)), np.zeros(5, dtype=int), FEATS2)

    def test_deterministic(self):
        X, y = separable_data()
        a = train_gradient_boost(X, y, FEATS2, params={"n_trees": 10})
        b = train_gradient_boost(X, y, FEATS2, params={"n_trees": 10})
        assert a.to_payload() == b.to_payload()

    def test_scores_in_unit_interval(self):
        X, y = separable_data()
        model = train_gradient_boost(X, y, FEATS2, params={"n_trees": 10})
        scores = model.predict_scores(X)
        assert np.all((scores > 0) & (scores < 1))


class TestSerialization:
    @pytest.mark.parametrize("kind", ["logistic", "random_forest", "gradient_boost"])
    def test_round_trip(self, tmp_path, kind):
        X, y = separable_data()
        params = {} if kind == "logistic" else {"n_trees": 5}
        model = train(ModelConfig(kind, seed=1, params=params), X, y, FEATS2)
        path = tmp_path / "model.json"
        model.save(path)
        loaded = load_model(path)
        np.testing.assert_allclose(loaded.predict_scores(X), model.predict_scores(X))

    def test_fingerprint_check(self, tmp_path):
        X, y = separable_data()
        model = train_logistic(X, y, FEATS2)
        path = tmp_path / "model.json"
        model.save(path)
        payload = json.loads(path.read_text())
        payload["feature_names"] = ["x", "y"]
        path.write_text(json.dumps(payload))
        with pytest.raises(ValueError):
            load_model(path)
