import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neuroeffort import DataError, Dataset
from neuroeffort.features import assemble
from neuroeffort.ml import (
    ClassifierFamily,
    ClassifierSpec,
    DecisionTreeModel,
    KnnModel,
    LdaModel,
    LogisticRegressionModel,
    Metrics,
    RandomForestModel,
    apply_standardizer,
    compute_metrics,
    cross_validate,
    cross_validate_table,
    fit_standardizer,
    group_kfold,
    read_predictions,
    train,
    write_predictions,
)


def blob_data(n=40, d=6, gap=4.0, seed=0):
    """Two well-separated Gaussian blobs; labels balanced."""
    rng = np.random.default_rng(seed)
    half = n // 2
    X = rng.normal(size=(n, d))
    X[:half] -= gap
    X[half:] += gap
    y = np.array([0] * half + [1] * (n - half))
    return X, y


def xor_data(reps=10):
    corners = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    X = np.tile(corners, (reps, 1))
    y = np.tile(np.array([0, 1, 1, 0]), reps)
    return X, y


class TestStandardizer:
    def test_transforms_training_rows_to_zero_mean_unit_std(self, default_dataset):
        table = assemble("basic", Dataset(default_dataset.trials[:64]))
        s = fit_standardizer(table)
        z = apply_standardizer(s, table)
        assert np.abs(z.mean(axis=0)).max() < 1e-9
        assert np.abs(z.std(axis=0) - 1.0).max() < 1e-9

    def test_constant_feature_maps_to_zero(self):
        from neuroeffort.features import FeatureTable, FeatureSet, TrialMeta

        meta = tuple(
            TrialMeta("p01", k, f"q{k:02d}", 1, 1, 1, (True,) * 16)
            for k in (1, 2, 3)
        )
        values = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        table = FeatureTable(FeatureSet.BASIC, ("a", "b"), meta, values)
        z = apply_standardizer(fit_standardizer(table), table)
        assert (z[:, 1] == 0).all()
        assert z[:, 0] == pytest.approx([-np.sqrt(1.5), 0.0, np.sqrt(1.5)])

    def test_name_mismatch_rejected(self, default_dataset):
        small = Dataset(default_dataset.trials[:4])
        s = fit_standardizer(assemble("basic", small))
        with pytest.raises(ValueError, match="names"):
            apply_standardizer(s, assemble("st", small))


class TestGroupKfold:
    def test_sixteen_participants_five_folds(self):
        ids = [f"p{i:02d}" for i in range(1, 17)]
        plan = group_kfold(ids, n_splits=5, seed=0)
        assert sorted(plan.sizes) == [3, 3, 3, 3, 4]
        assert sorted(plan.assignments) == ids

    def test_folds_disjoint_and_cover(self):
        ids = [f"p{i:02d}" for i in range(1, 17)]
        plan = group_kfold(ids, n_splits=5, seed=3)
        seen = []
        for fold in range(5):
            test = plan.test_participants(fold)
            train_ = plan.train_participants(fold)
            assert not set(test) & set(train_)
            assert sorted(test + train_) == ids
            seen.extend(test)
        assert sorted(seen) == ids

    def test_deterministic_for_seed(self):
        ids = [f"p{i:02d}" for i in range(1, 17)]
        assert group_kfold(ids, seed=7) == group_kfold(ids, seed=7)
        assert group_kfold(ids, seed=7) != group_kfold(ids, seed=8)

    def test_validation(self):
        with pytest.raises(ValueError, match="unique"):
            group_kfold(["a", "a", "b"], n_splits=2)
        with pytest.raises(ValueError, match="n_splits"):
            group_kfold(["a", "b", "c"], n_splits=1)
        with pytest.raises(ValueError, match="exceeds"):
            group_kfold(["a", "b", "c"], n_splits=4)

    @given(
        n=st.integers(min_value=4, max_value=24),
        n_splits=st.integers(min_value=2, max_value=6),
        seed=st.integers(min_value=0, max_value=10_000),
    )
    def test_sizes_never_spread_more_than_one(self, n, n_splits, seed):
        if n_splits > n:
            return
        plan = group_kfold([f"s{i}" for i in range(n)], n_splits=n_splits, seed=seed)
        assert sum(plan.sizes) == n
        assert max(plan.sizes) - min(plan.sizes) <= 1


class TestMetrics:
    def test_hand_worked_example(self):
        m = compute_metrics([0, 0, 0, 0, 1, 1], [0, 0, 0, 0, 0, 1])
        assert m.confusion == ((4, 0), (1, 1))
        assert m.accuracy == pytest.approx(5 / 6)
        assert m.precision_weighted == pytest.approx(13 / 15)
        assert m.recall_weighted == pytest.approx(5 / 6)
        assert m.f1_weighted == pytest.approx(22 / 27)

    def test_majority_class_baseline_is_label_rate(self):
        y_true = [1] * 168 + [0] * 88
        m = compute_metrics(y_true, [1] * 256)
        assert m.accuracy == 0.65625

    @given(
        st.lists(
            st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=200
        )
    )
    def test_weighted_recall_equals_accuracy(self, pairs):
        yt = [a for a, _ in pairs]
        yp = [b for _, b in pairs]
        m = compute_metrics(yt, yp)
        assert m.recall_weighted == pytest.approx(m.accuracy, abs=1e-12)

    def test_from_confusion_matches_direct(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            c = rng.integers(0, 30, size=(2, 2))
            if c.sum() == 0:
                continue
            yt = [0] * (c[0, 0] + c[0, 1]) + [1] * (c[1, 0] + c[1, 1])
            yp = [0] * c[0, 0] + [1] * c[0, 1] + [0] * c[1, 0] + [1] * c[1, 1]
            assert Metrics.from_confusion(c) == compute_metrics(yt, yp)

    def test_validation(self):
        with pytest.raises(ValueError, match="mismatch"):
            compute_metrics([0, 1], [0])
        with pytest.raises(ValueError, match="empty"):
            compute_metrics([], [])
        with pytest.raises(ValueError, match="0 or 1"):
            compute_metrics([0, 2], [0, 1])
        with pytest.raises(ValueError, match="2x2"):
            Metrics.from_confusion([[1, 2, 3]])


class TestClassifierSpec:
    def test_defaults_merged(self):
        spec = ClassifierSpec("rf")
        assert spec.family is ClassifierFamily.RANDOM_FOREST
        assert spec.params == {"n_trees": 100, "max_depth": 8, "min_leaf": 2}

    def test_override_kept(self):
        spec = ClassifierSpec("knn", {"k": 3})
        assert spec.params == {"k": 3}

    def test_unknown_param_rejected(self):
        with pytest.raises(ValueError, match="unknown hyperparameters"):
            ClassifierSpec("lr", {"learning_rate": 0.1})

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError, match="unknown classifier family"):
            ClassifierSpec("svm")

    def test_bad_values_rejected(self):
        with pytest.raises(ValueError):
            ClassifierSpec("knn", {"k": 0})
        with pytest.raises(ValueError):
            ClassifierSpec("rf", {"n_trees": 0})


class TestInputValidation:
    @pytest.mark.parametrize("family", ["lr", "lda", "knn", "dt"])
    def test_single_class_rejected(self, family):
        X = np.random.default_rng(22).normal(size=(10, 3))
        with pytest.raises(ValueError, match="single class"):
            train(ClassifierSpec(family), X, np.ones(10, dtype=int))

    def test_nonfinite_rejected(self):
        X = np.zeros((4, 2))
        X[0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            train(ClassifierSpec("lr"), X, np.array([0, 1, 0, 1]))

    def test_nonbinary_labels_rejected(self):
        X = np.zeros((4, 2))
        with pytest.raises(ValueError, match="0 or 1"):
            train(ClassifierSpec("lda"), X, np.array([0, 1, 2, 1]))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="incompatible"):
            train(ClassifierSpec("knn"), np.zeros((4, 2)), np.array([0, 1]))


class TestLinearModels:
    def test_separable_blobs_perfect(self):
        X, y = blob_data()
        for family in ("lr", "lda"):
            model = train(ClassifierSpec(family), X, y)
            assert (model.predict(X) == y).all()

    def test_generalizes_to_new_points(self):
        X, y = blob_data(seed=1)
        Xq, yq = blob_data(n=20, seed=2)
        for family in ("lr", "lda"):
            model = train(ClassifierSpec(family), X, y)
            assert (model.predict(Xq) == yq).all()

    def test_lr_shrinks_with_ridge(self):
        X, y = blob_data(seed=3)
        loose = LogisticRegressionModel.fit(
            X, y, {"ridge_lambda": 0.01, "tol": 1e-6, "max_iter": 1000}
        )
        tight = LogisticRegressionModel.fit(
            X, y, {"ridge_lambda": 100.0, "tol": 1e-6, "max_iter": 1000}
        )
        assert np.linalg.norm(tight.weights) < np.linalg.norm(loose.weights)

    def test_lda_deterministic(self):
        X, y = blob_data(seed=4)
        a = LdaModel.fit(X, y, {"shrinkage": 1e-6})
        b = LdaModel.fit(X, y, {"shrinkage": 1e-6})
        assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


class TestKnn:
    def test_majority_vote(self):
        X = np.array([[0.0], [0.1], [0.2], [10.0], [10.1]])
        y = np.array([1, 1, 1, 0, 0])
        model = KnnModel.fit(X, y, {"k": 5})
        assert model.predict(np.array([[0.05]]))[0] == 1
        model3 = KnnModel.fit(X, y, {"k": 3})
        assert model3.predict(np.array([[10.05]]))[0] == 0

    def test_tie_resolved_by_nearest_neighbor(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([1, 0, 1, 0])
        model = KnnModel.fit(X, y, {"k": 4})
        # votes split 2-2; class of the closest training point wins
        assert model.predict(np.array([[0.4]]))[0] == 1
        assert model.predict(np.array([[0.6]]))[0] == 0

    def test_k_capped_at_training_size(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([0, 1])
        model = KnnModel.fit(X, y, {"k": 5})
        assert model.predict(np.array([[0.1]]))[0] == 0


class TestDecisionTree:
    def test_solves_xor_where_linear_models_fail(self):
        X, y = xor_data()
        dt = train(ClassifierSpec("dt"), X, y)
        assert (dt.predict(X) == y).all()
        lr = train(ClassifierSpec("lr"), X, y)
        assert np.mean(lr.predict(X) == y) <= 0.75

    def test_tie_breaks_to_first_feature(self):
        x = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
        X = np.column_stack([x, x])
        y = np.array([0, 0, 0, 1, 1, 1])
        model = DecisionTreeModel.fit(X, y, {"max_depth": 8, "min_leaf": 2})
        assert model.root.feature == 0
        assert model.root.threshold == pytest.approx(2.5)

    def test_depth_limit_respected(self):
        rng = np.random.default_rng(23)
        X = rng.normal(size=(200, 4))
        y = rng.integers(0, 2, size=200)

        def depth(node):
            if node.is_leaf:
                return 0
            return 1 + max(depth(node.left), depth(node.right))

        model = DecisionTreeModel.fit(X, y, {"max_depth": 3, "min_leaf": 2})
        assert depth(model.root) <= 3

    def test_min_leaf_respected(self):
        rng = np.random.default_rng(24)
        X = rng.normal(size=(100, 3))
        y = rng.integers(0, 2, size=100)
        model = DecisionTreeModel.fit(X, y, {"max_depth": 8, "min_leaf": 10})

        def leaf_sizes(node, idx):
            if node.is_leaf:
                return [len(idx)]
            mask = X[idx, node.feature] <= node.threshold
            return leaf_sizes(node.left, idx[mask]) + leaf_sizes(node.right, idx[~mask])

        assert min(leaf_sizes(model.root, np.arange(100))) >= 10


class TestRandomForest:
    def test_separable_accuracy(self):
        X, y = blob_data(n=60, seed=5)
        model = train(ClassifierSpec("rf", {"n_trees": 15}), X, y, seed=0)
        assert (model.predict(X) == y).all()

    def test_deterministic_for_seed(self):
        rng = np.random.default_rng(25)
        X = rng.normal(size=(60, 8))
        y = (X[:, 0] + rng.normal(0, 0.8, 60) > 0).astype(int)
        spec = ClassifierSpec("rf", {"n_trees": 9})
        a = train(spec, X, y, seed=42).predict(X)
        b = train(spec, X, y, seed=42).predict(X)
        assert np.array_equal(a, b)

    def test_thread_count_does_not_change_result(self):
        rng = np.random.default_rng(26)
        X = rng.normal(size=(60, 8))
        y = (X[:, 1] > 0).astype(int)
        spec = ClassifierSpec("rf", {"n_trees": 12})
        serial = train(spec, X, y, seed=7, jobs=1)
        threaded = train(spec, X, y, seed=7, jobs=4)
        assert serial.trees == threaded.trees

    def test_sequence_seed_accepted(self):
        X, y = blob_data(n=30, seed=6)
        a = RandomForestModel.fit(X, y, ClassifierSpec("rf", {"n_trees": 5}).params, seed=[3, 1])
        b = RandomForestModel.fit(X, y, ClassifierSpec("rf", {"n_trees": 5}).params, seed=[3, 1])
        assert a.trees == b.trees


@pytest.fixture(scope="module")
def cv_result(default_dataset):
    return cross_validate(default_dataset, "basic", ClassifierSpec("knn"), seed=0)


class TestCrossValidation:
    def test_fold_sizes(self, cv_result):
        assert sorted(cv_result.plan.sizes) == [3, 3, 3, 3, 4]

    def test_each_trial_predicted_exactly_once(self, cv_result, default_dataset):
        keys = [r.key for r in cv_result.predictions]
        assert keys == sorted(t.key for t in default_dataset.trials)
        assert len(set(keys)) == 256

    def test_fold_column_matches_plan(self, cv_result):
        for row in cv_result.predictions:
            assert cv_result.plan.assignments[row.participant_id] == row.fold

    def test_no_participant_in_own_training_folds(self, cv_result):
        for detail in cv_result.folds:
            assert not set(detail.test_participants) & set(detail.train_participants)

    def test_standardizer_fit_excludes_test_participants(
        self, cv_result, default_dataset
    ):
        global_mean = fit_standardizer(assemble("basic", default_dataset)).mean
        for detail in cv_result.folds:
            assert not np.array_equal(detail.standardizer.mean, global_mean)

    def test_pooled_matches_prediction_rows(self, cv_result):
        recomputed = compute_metrics(
            [r.y_true for r in cv_result.predictions],
            [r.y_pred for r in cv_result.predictions],
        )
        assert recomputed == cv_result.pooled

    def test_deterministic_across_runs_and_jobs(self, default_dataset, cv_result):
        again = cross_validate(default_dataset, "basic", ClassifierSpec("knn"), seed=0)
        threaded = cross_validate(
            default_dataset, "basic", ClassifierSpec("knn"), seed=0, jobs=3
        )
        assert again.predictions == cv_result.predictions
        assert threaded.predictions == cv_result.predictions

    def test_temporal_covers_240_rows(self, default_dataset):
        result = cross_validate(
            default_dataset, "temporal", ClassifierSpec("knn"), seed=0
        )
        assert len(result.predictions) == 240

    def test_manifest_contents(self, cv_result):
        manifest = cv_result.manifest()
        assert manifest["feature_set"] == "basic"
        assert manifest["classifier"]["family"] == "knn"
        assert manifest["n_splits"] == 5
        assert manifest["n_rows"] == 256
        assert len(manifest["fold_assignments"]) == 16

    def test_too_many_splits_rejected(self, default_dataset):
        with pytest.raises(ValueError, match="exceeds"):
            cross_validate(
                default_dataset, "basic", ClassifierSpec("knn"), n_splits=17
            )


class TestPredictionCsv:
    def test_round_trip(self, tmp_path, default_dataset):
        result = cross_validate(
            Dataset(default_dataset.trials[:80]),
            "basic",
            ClassifierSpec("knn"),
            n_splits=2,
        )
        path = write_predictions(result.predictions, tmp_path / "pred.csv")
        assert read_predictions(path) == result.predictions

    def test_not_a_predictions_csv(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n1,2\n")
        with pytest.raises(DataError, match="not a predictions CSV"):
            read_predictions(path)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "participant_id,question_order,y_true,y_pred,fold\np01,1,1\n"
        )
        with pytest.raises(DataError, match="ragged"):
            read_predictions(path)

    def test_non_integer_field(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "participant_id,question_order,y_true,y_pred,fold\np01,one,1,1,0\n"
        )
        with pytest.raises(DataError, match="bad.csv:2"):
            read_predictions(path)
