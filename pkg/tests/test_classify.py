"""Tests for label combinations, SMOTE, the classifiers, and CV."""

import math

import numpy as np
import pytest

from spamflow.classify import (
    GaussianNaiveBayes,
    LabeledDataset,
    LinearSVM,
    apply_combination,
    balance_with_smote,
    confusion_metrics,
    cross_validate,
    label_accounts,
    read_labels,
    smote,
    stratified_folds,
    train,
    write_labels,
)
from spamflow.errors import ConfigError, DataError


def two_blobs(rng, n_per_class=40, separation=6.0, dim=2):
    """Linearly separable Gaussian blobs around +/- separation/2."""
    a = rng.normal(-separation / 2, 1.0, size=(n_per_class, dim))
    b = rng.normal(separation / 2, 1.0, size=(n_per_class, dim))
    X = np.concatenate([a, b])
    y = np.concatenate([np.zeros(n_per_class, dtype=int), np.ones(n_per_class, dtype=int)])
    return X, y


class TestApplyCombination:
    def test_combination_one(self):
        y, kept = apply_combination(["spam", "app", "quote", "normal", "unknown"], 1)
        assert y.tolist() == [1, 0, 0, 0]
        assert kept.tolist() == [0, 1, 2, 3]

    def test_combination_two_drops_app_and_quote(self):
        y, kept = apply_combination(["spam", "app", "quote", "normal"], 2)
        assert y.tolist() == [1, 0]
        assert kept.tolist() == [0, 3]

    def test_combination_three_app_is_spam(self):
        y, kept = apply_combination(["app", "quote"], 3)
        assert y.tolist() == [1, 0]

    def test_unknown_always_dropped(self):
        for combination in (1, 2, 3):
            y, kept = apply_combination(["unknown"], combination)
            assert len(y) == 0

    def test_bad_combination_rejected(self):
        with pytest.raises(ConfigError):
            apply_combination(["spam"], 4)


class TestSmote:
    def test_no_rows_needed_at_target(self):
        minority = np.array([[0.0, 0.0], [1.0, 1.0]])
        assert smote(minority, target_count=2).shape == (0, 2)

    def test_segment_geometry_for_pair(self):
        minority = np.array([[0.0, 0.0], [1.0, 1.0]])
        synthetic = smote(minority, target_count=30, k_neighbors=1, seed=0)
        assert synthetic.shape == (28, 2)
        # Every point must lie on the segment between the two inputs.
        for point in synthetic:
            assert point[0] == pytest.approx(point[1], abs=1e-12)
            assert -1e-12 <= point[0] <= 1.0 + 1e-12

    def test_synthetic_points_interpolate_neighbors(self):
        rng = np.random.default_rng(81)
        for trial in range(10):
            n = int(rng.integers(3, 12))
            dim = int(rng.integers(1, 4))
            minority = rng.normal(size=(n, dim))
            k = int(rng.integers(1, n))
            synthetic = smote(minority, target_count=n + 15, k_neighbors=k, seed=trial)
            # Independent neighbor computation.
            distances = np.linalg.norm(
                minority[:, None, :] - minority[None, :, :], axis=2
            )
            np.fill_diagonal(distances, np.inf)
            neighbor_ids = np.argsort(distances, axis=1, kind="stable")[:, : min(k, n - 1)]
            for point in synthetic:
                found = False
                for i in range(n):
                    for j in neighbor_ids[i]:
                        delta = minority[j] - minority[i]
                        offset = point - minority[i]
                        denominator = float(delta @ delta)
                        if denominator == 0.0:
                            if np.allclose(offset, 0.0, atol=1e-9):
                                found = True
                                break
                            continue
                        u = float(offset @ delta) / denominator
                        if -1e-9 <= u <= 1.0 + 1e-9 and np.allclose(
                            minority[i] + u * delta, point, atol=1e-9
                        ):
                            found = True
                            break
                    if found:
                        break
                assert found

    def test_singleton_duplicated(self):
        synthetic = smote(np.array([[3.0, 4.0]]), target_count=4)
        np.testing.assert_array_equal(synthetic, np.array([[3.0, 4.0]] * 3))

    def test_deterministic(self):
        minority = np.random.default_rng(82).normal(size=(6, 3))
        a = smote(minority, 20, seed=5)
        b = smote(minority, 20, seed=5)
        np.testing.assert_array_equal(a, b)

    def test_balance_gives_equal_counts(self):
        rng = np.random.default_rng(83)
        X = rng.normal(size=(30, 2))
        y = np.array([1] * 5 + [0] * 25)
        X_out, y_out = balance_with_smote(X, y, seed=1)
        assert int(y_out.sum()) == 25
        assert len(y_out) == 50
        np.testing.assert_array_equal(X_out[:30], X)

    def test_balance_requires_both_classes(self):
        X = np.zeros((4, 2))
        with pytest.raises(DataError):
            balance_with_smote(X, np.zeros(4, dtype=int))


class TestLinearSVM:
    def test_separable_data_fits_perfectly(self):
        X, y = two_blobs(np.random.default_rng(84), separation=12.0)
        model = LinearSVM(seed=0).fit(X, y)
        assert np.mean(model.predict(X) == y) == 1.0

    def test_deterministic(self):
        X, y = two_blobs(np.random.default_rng(85))
        a = LinearSVM(seed=3).fit(X, y)
        b = LinearSVM(seed=3).fit(X, y)
        np.testing.assert_array_equal(a.coef_, b.coef_)
        assert a.intercept_ == b.intercept_

    def test_single_class_rejected(self):
        X = np.random.default_rng(86).normal(size=(5, 2))
        with pytest.raises(DataError):
            LinearSVM().fit(X, np.ones(5, dtype=int))

    def test_dimension_mismatch_rejected(self):
        X, y = two_blobs(np.random.default_rng(87), n_per_class=10)
        model = LinearSVM().fit(X, y)
        with pytest.raises(DataError):
            model.predict(np.zeros((2, 5)))

    def test_zero_column_padding_invariance(self):
        rng = np.random.default_rng(88)
        X, y = two_blobs(rng, n_per_class=25)
        X_test = rng.normal(size=(40, 2))
        plain = LinearSVM(seed=1).fit(X, y).predict(X_test)
        padded = (
            LinearSVM(seed=1)
            .fit(np.hstack([X, np.zeros((len(X), 1))]), y)
            .predict(np.hstack([X_test, np.zeros((len(X_test), 1))]))
        )
        np.testing.assert_array_equal(plain, padded)


def nb_log_posterior_oracle(model, X):
    """Direct per-row posterior from the fitted means and variances."""
    out = np.empty((len(X), 2))
    for r, x in enumerate(X):
        for c in (0, 1):
            value = math.log(model.priors_[c])
            for j in range(len(x)):
                var = model.variances_[c][j]
                mean = model.means_[c][j]
                value += -0.5 * math.log(2.0 * math.pi * var)
                value += -((x[j] - mean) ** 2) / (2.0 * var)
            out[r, c] = value
    return out


class TestGaussianNaiveBayes:
    def test_boundary_between_symmetric_clusters(self):
        rng = np.random.default_rng(89)
        X = np.concatenate(
            [rng.normal(-5.0, 1.0, size=(200, 1)), rng.normal(5.0, 1.0, size=(200, 1))]
        )
        y = np.array([0] * 200 + [1] * 200)
        model = GaussianNaiveBayes().fit(X, y)
        grid = np.linspace(-2.0, 2.0, 4001).reshape(-1, 1)
        predictions = model.predict(grid)
        flips = np.flatnonzero(np.diff(predictions))
        assert len(flips) == 1
        boundary = float(grid[flips[0], 0])
        assert abs(boundary) <= 0.1

    def test_posterior_matches_brute_force(self):
        rng = np.random.default_rng(90)
        for _ in range(10):
            X, y = two_blobs(rng, n_per_class=15, dim=int(rng.integers(1, 4)))
            model = GaussianNaiveBayes().fit(X, y)
            probe = rng.normal(size=(10, X.shape[1]))
            got = model.predict_log_posterior(probe)
            expected = nb_log_posterior_oracle(model, probe)
            np.testing.assert_allclose(got, expected, atol=1e-9)
            np.testing.assert_array_equal(
                model.predict(probe), np.argmax(expected, axis=1)
            )

    def test_variance_floor_applied(self):
        X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 0.5], [1.0, 0.7]])
        y = np.array([0, 0, 1, 1])
        model = GaussianNaiveBayes().fit(X, y)
        assert np.all(model.variances_ > 0)
        predictions = model.predict(X)
        assert np.all(np.isfinite(model.predict_log_posterior(X)))
        assert set(predictions.tolist()) <= {0, 1}

    def test_zero_column_padding_invariance(self):
        rng = np.random.default_rng(91)
        X, y = two_blobs(rng, n_per_class=25)
        X_test = rng.normal(size=(40, 2))
        plain = GaussianNaiveBayes().fit(X, y).predict(X_test)
        padded = (
            GaussianNaiveBayes()
            .fit(np.hstack([X, np.zeros((len(X), 1))]), y)
            .predict(np.hstack([X_test, np.zeros((len(X_test), 1))]))
        )
        np.testing.assert_array_equal(plain, padded)

    def test_train_dispatch(self):
        X, y = two_blobs(np.random.default_rng(92), n_per_class=10)
        assert isinstance(train(X, y, "linear-svm"), LinearSVM)
        assert isinstance(train(X, y, "gaussian-nb"), GaussianNaiveBayes)
        with pytest.raises(ConfigError):
            train(X, y, "random-forest")


class TestConfusionMetrics:
    def test_balanced_example(self):
        metrics = confusion_metrics(tp=9, fp=1, fn=1, tn=9)
        for name in ("accuracy", "precision", "recall", "f1"):
            assert metrics[name] == pytest.approx(0.9)

    def test_all_correct(self):
        metrics = confusion_metrics(tp=10, fp=0, fn=0, tn=10)
        assert all(v == 1.0 for v in metrics.values())

    def test_f1_harmonic_identity(self):
        rng = np.random.default_rng(93)
        for _ in range(50):
            tp, fp, fn, tn = (int(v) for v in rng.integers(0, 20, size=4))
            if tp + fp + fn + tn == 0:
                continue
            metrics = confusion_metrics(tp, fp, fn, tn)
            p, r = metrics["precision"], metrics["recall"]
            if p + r > 0:
                assert metrics["f1"] == pytest.approx(2 * p * r / (p + r))
            else:
                assert metrics["f1"] == 0.0
            assert 0.0 <= metrics["accuracy"] <= 1.0


class TestStratifiedFolds:
    def test_folds_partition_the_dataset(self):
        rng = np.random.default_rng(94)
        for trial in range(20):
            n1 = int(rng.integers(10, 30))
            n0 = int(rng.integers(10, 30))
            y = np.array([1] * n1 + [0] * n0)
            folds = int(rng.integers(2, 10))
            assignments = stratified_folds(y, folds, seed=trial)
            flat = sorted(i for fold in assignments for i in fold)
            assert flat == list(range(len(y)))
            sizes = [len(fold) for fold in assignments]
            assert max(sizes) - min(sizes) <= 2

    def test_each_fold_stratified(self):
        y = np.array([1] * 20 + [0] * 20)
        for fold in stratified_folds(y, 10, seed=0):
            labels = y[fold]
            assert labels.sum() >= 1
            assert (1 - labels).sum() >= 1


def toy_dataset(rng, n_spam=15, n_benign=15, combination=3):
    X, y = two_blobs(rng, n_per_class=max(n_spam, n_benign))
    raw = []
    rows = []
    ids = []
    count = {1: 0, 0: 0}
    for i, label in enumerate(y):
        budget = n_spam if label == 1 else n_benign
        if count[label] >= budget:
            continue
        count[label] += 1
        rows.append(X[i])
        raw.append("spam" if label == 1 else "normal")
        ids.append(f"g{i:03d}")
    return LabeledDataset(
        neighborhood_id="n000",
        group_ids=ids,
        X=np.array(rows),
        raw_labels=raw,
        combination=combination,
    )


class TestCrossValidate:
    def test_near_perfect_on_separable_data(self):
        dataset = toy_dataset(np.random.default_rng(95), n_spam=25, n_benign=25)
        report = cross_validate(dataset, folds=5, seed=0)
        assert report.precision >= 0.95
        assert report.recall >= 0.95

    def test_per_fold_metrics_shape(self):
        dataset = toy_dataset(np.random.default_rng(96), n_spam=20, n_benign=20)
        report = cross_validate(dataset, folds=10, seed=1)
        assert len(report.per_fold) == 10
        for fold in report.per_fold:
            assert set(fold) == {"accuracy", "precision", "recall", "f1"}
            assert all(0.0 <= v <= 1.0 for v in fold.values())
        assert report.accuracy == pytest.approx(
            np.mean([fold["accuracy"] for fold in report.per_fold])
        )

    def test_deterministic(self):
        dataset = toy_dataset(np.random.default_rng(97))
        a = cross_validate(dataset, folds=5, seed=4)
        b = cross_validate(dataset, folds=5, seed=4)
        assert a.as_dict() == b.as_dict()

    def test_too_few_rows_error_names_neighborhood(self):
        dataset = toy_dataset(np.random.default_rng(98), n_spam=3, n_benign=20)
        with pytest.raises(DataError, match="n000"):
            cross_validate(dataset, folds=10)

    def test_standard_errors_reported(self):
        dataset = toy_dataset(np.random.default_rng(99))
        report = cross_validate(dataset, folds=5, seed=0)
        assert set(report.standard_errors) == {"accuracy", "precision", "recall", "f1"}
        assert all(v >= 0 for v in report.standard_errors.values())


class TestLabelAccounts:
    def test_threshold_inclusive(self):
        assert label_accounts({"u1": (2, 5)}, tau=0.4) == {"u1": "spam"}

    def test_no_spam_is_benign(self):
        assert label_accounts({"u1": (0, 10)}, tau=0.4) == {"u1": "benign"}

    def test_just_below_threshold(self):
        assert label_accounts({"u1": (39, 100)}, tau=0.4) == {"u1": "benign"}

    def test_zero_total_skipped(self):
        assert label_accounts({"u1": (0, 0)}, tau=0.4) == {}

    def test_bad_counts_rejected(self):
        with pytest.raises(DataError):
            label_accounts({"u1": (5, 3)})

    def test_bad_tau_rejected(self):
        with pytest.raises(ConfigError):
            label_accounts({"u1": (1, 2)}, tau=1.5)


class TestLabelIo:
    def test_round_trip(self, tmp_path):
        labels = {"g2": "spam", "g1": "normal", "g3": "quote"}
        path = tmp_path / "labels.csv"
        write_labels(labels, path)
        assert read_labels(path) == labels

    def test_unexpected_label_rejected(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("group_id,raw_label\ng1,invalid\n", encoding="utf-8")
        with pytest.raises(DataError):
            read_labels(path)


class TestLabeledDataset:
    def test_mismatched_lengths_rejected(self):
        with pytest.raises(DataError):
            LabeledDataset("n0", ["g1"], np.zeros((2, 2)), ["spam", "normal"])

    def test_unexpected_raw_label_rejected(self):
        with pytest.raises(DataError):
            LabeledDataset("n0", ["g1"], np.zeros((1, 2)), ["ham"])

    def test_binary_view(self):
        dataset = LabeledDataset(
            "n0",
            ["g1", "g2", "g3"],
            np.zeros((3, 2)),
            ["spam", "unknown", "normal"],
            combination=3,
        )
        y, kept = dataset.binary()
        assert y.tolist() == [1, 0]
        assert kept.tolist() == [0, 2]
