"""Binary spam/benign classification over propagation features.

Covers the label-combination policies, SMOTE oversampling, a linear SVM fit
by seeded stochastic subgradient descent on the hinge loss, a Gaussian naive
Bayes cross-check, stratified k-fold cross-validation (SMOTE applied inside
training folds only), and threshold-based account labeling.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import ConfigError, DataError
from .validation import (
    check_binary_labels,
    check_feature_matrix,
    check_fraction,
    check_positive_int,
    check_seed,
    derive_seed,
)

logger = logging.getLogger(__name__)

__all__ = [
    "RAW_LABELS",
    "COMBINATIONS",
    "LabeledDataset",
    "EvalReport",
    "LinearSVM",
    "GaussianNaiveBayes",
    "apply_combination",
    "smote",
    "balance_with_smote",
    "train",
    "stratified_folds",
    "cross_validate",
    "confusion_metrics",
    "label_accounts",
    "write_labels",
    "read_labels",
]

RAW_LABELS = ("spam", "app", "quote", "normal", "unknown")

# combination -> (spam labels, benign labels); anything else is dropped.
COMBINATIONS = {
    1: (frozenset({"spam"}), frozenset({"normal", "quote", "app"})),
    2: (frozenset({"spam"}), frozenset({"normal"})),
    3: (frozenset({"spam", "app"}), frozenset({"normal", "quote"})),
}


@dataclass
class LabeledDataset:
    """Feature rows with raw labels for one neighborhood."""

    neighborhood_id: str
    group_ids: list
    X: np.ndarray
    raw_labels: list
    combination: int = 3

    def __post_init__(self):
        if self.combination not in COMBINATIONS:
            raise ConfigError(f"combination must be 1, 2 or 3, got {self.combination}")
        if not len(self.group_ids) == len(self.X) == len(self.raw_labels):
            raise DataError("LabeledDataset: rows, ids and labels must align")
        bad = set(self.raw_labels) - set(RAW_LABELS)
        if bad:
            raise DataError(f"LabeledDataset: unexpected raw labels {sorted(bad)}")

    def binary(self) -> tuple[np.ndarray, np.ndarray]:
        """(y, kept_row_indices) after applying the label combination."""
        return apply_combination(self.raw_labels, self.combination)


def apply_combination(raw_labels: Sequence[str], combination: int) -> tuple[np.ndarray, np.ndarray]:
    """Map raw labels to binary spam=1/benign=0.

    Returns (y, kept) where kept indexes the surviving rows; rows whose
    label belongs to neither class (including "unknown") are dropped.
    """
    if combination not in COMBINATIONS:
        raise ConfigError(f"combination must be 1, 2 or 3, got {combination}")
    spam, benign = COMBINATIONS[combination]
    y = []
    kept = []
    for index, label in enumerate(raw_labels):
        if label in spam:
            y.append(1)
            kept.append(index)
        elif label in benign:
            y.append(0)
            kept.append(index)
    return np.array(y, dtype=int), np.array(kept, dtype=int)


def smote(
    minority: np.ndarray, target_count: int, k_neighbors: int = 5, seed: int = 0
) -> np.ndarray:
    """Synthetic minority rows: x + u * (x_nn - x) toward a random near neighbor.

    Returns target_count - len(minority) rows (empty when already at target).
    A singleton minority is duplicated since it has no neighbors.
    """
    minority = check_feature_matrix(minority, "minority")
    target_count = check_positive_int(target_count, "target_count")
    k_neighbors = check_positive_int(k_neighbors, "k_neighbors")
    seed = check_seed(seed)
    n = len(minority)
    n_needed = target_count - n
    if n_needed <= 0:
        return np.empty((0, minority.shape[1]))
    rng = np.random.default_rng(seed)
    if n == 1:
        return np.repeat(minority, n_needed, axis=0)
    k = min(k_neighbors, n - 1)
    distances = np.linalg.norm(minority[:, None, :] - minority[None, :, :], axis=2)
    np.fill_diagonal(distances, np.inf)
    neighbor_ids = np.argsort(distances, axis=1, kind="stable")[:, :k]
    synthetic = np.empty((n_needed, minority.shape[1]))
    for i in range(n_needed):
        base = int(rng.integers(n))
        neighbor = minority[neighbor_ids[base, int(rng.integers(k))]]
        u = rng.random()
        synthetic[i] = minority[base] + u * (neighbor - minority[base])
    return synthetic


def balance_with_smote(
    X: np.ndarray, y: np.ndarray, k_neighbors: int = 5, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Oversample the minority class until both classes have equal counts."""
    X = check_feature_matrix(X)
    y = check_binary_labels(y, len(X))
    n_spam = int(y.sum())
    n_benign = len(y) - n_spam
    if n_spam == 0 or n_benign == 0:
        raise DataError("balance_with_smote: need both classes present")
    if n_spam == n_benign:
        return X, y
    minority_label = 1 if n_spam < n_benign else 0
    target = max(n_spam, n_benign)
    synthetic = smote(X[y == minority_label], target, k_neighbors, seed)
    X_out = np.concatenate([X, synthetic])
    y_out = np.concatenate([y, np.full(len(synthetic), minority_label, dtype=int)])
    return X_out, y_out


class LinearSVM(BaseEstimator, ClassifierMixin):
    """Linear hinge-loss classifier fit by seeded stochastic subgradient descent.

    Step size decays as 1/(reg * (t0 + t)) with burn-in offset t0 equal to the
    training-set size, which keeps the first updates bounded; the bias term is
    unregularized.
    """

    def __init__(self, epochs=100, reg=0.01, seed=0):
        self.epochs = epochs
        self.reg = reg
        self.seed = seed

    def fit(self, X, y) -> "LinearSVM":
        X = check_feature_matrix(X)
        y = check_binary_labels(y, len(X))
        if len(np.unique(y)) < 2:
            raise DataError("LinearSVM.fit: need both classes in the training data")
        epochs = check_positive_int(self.epochs, "epochs")
        reg = float(self.reg)
        if reg <= 0:
            raise ConfigError("reg must be positive")
        rng = np.random.default_rng(check_seed(self.seed))
        signed = np.where(y == 1, 1.0, -1.0)
        w = np.zeros(X.shape[1])
        b = 0.0
        t = 0
        t0 = len(X)
        for _ in range(epochs):
            for i in rng.permutation(len(X)):
                t += 1
                step = 1.0 / (reg * (t0 + t))
                margin = signed[i] * (X[i] @ w + b)
                w *= 1.0 - step * reg
                if margin < 1.0:
                    w += step * signed[i] * X[i]
                    b += step * signed[i]
        self.coef_ = w
        self.intercept_ = b
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X) -> np.ndarray:
        X = check_feature_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise DataError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return X @ self.coef_ + self.intercept_

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0.0).astype(int)


class GaussianNaiveBayes(BaseEstimator, ClassifierMixin):
    """Gaussian naive Bayes with a variance floor."""

    def __init__(self, var_floor=1e-9):
        self.var_floor = var_floor

    def fit(self, X, y) -> "GaussianNaiveBayes":
        X = check_feature_matrix(X)
        y = check_binary_labels(y, len(X))
        if len(np.unique(y)) < 2:
            raise DataError("GaussianNaiveBayes.fit: need both classes")
        floor = float(self.var_floor)
        if floor <= 0:
            raise ConfigError("var_floor must be positive")
        self.classes_ = np.array([0, 1])
        self.priors_ = np.array([(y == c).mean() for c in (0, 1)])
        self.means_ = np.stack([X[y == c].mean(axis=0) for c in (0, 1)])
        self.variances_ = np.maximum(
            np.stack([X[y == c].var(axis=0) for c in (0, 1)]), floor
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict_log_posterior(self, X) -> np.ndarray:
        X = check_feature_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise DataError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        out = np.empty((len(X), 2))
        for c in (0, 1):
            quad = (X - self.means_[c]) ** 2 / self.variances_[c]
            out[:, c] = (
                math.log(self.priors_[c])
                - 0.5 * np.sum(np.log(2.0 * np.pi * self.variances_[c]))
                - 0.5 * quad.sum(axis=1)
            )
        return out

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_log_posterior(X), axis=1)


def train(X, y, kind: str = "linear-svm", seed: int = 0):
    """Fit a classifier of the given kind on already-balanced rows."""
    if kind == "linear-svm":
        return LinearSVM(seed=seed).fit(X, y)
    if kind == "gaussian-nb":
        return GaussianNaiveBayes().fit(X, y)
    raise ConfigError(f"unknown classifier kind {kind!r}")


def confusion_metrics(tp: int, fp: int, fn: int, tn: int) -> dict:
    total = tp + fp + fn + tn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = (tp + tn) / total if total else 0.0
    return {"accuracy": accuracy, "precision": precision, "recall": recall, "f1": f1}


@dataclass
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    per_fold: list = field(default_factory=list)
    standard_errors: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "standard_errors": dict(self.standard_errors),
            "per_fold": [dict(fold) for fold in self.per_fold],
        }


def stratified_folds(y: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    """Deal each class round-robin into ``folds`` shuffled test folds."""
    rng = np.random.default_rng(seed)
    assignments = [[] for _ in range(folds)]
    for label in (0, 1):
        indices = np.flatnonzero(y == label)
        rng.shuffle(indices)
        for position, index in enumerate(indices):
            assignments[position % folds].append(int(index))
    return [np.array(sorted(fold), dtype=int) for fold in assignments]


def cross_validate(
    dataset: LabeledDataset,
    folds: int = 10,
    kind: str = "linear-svm",
    seed: int = 0,
    k_neighbors: int = 5,
) -> EvalReport:
    """Stratified k-fold CV; SMOTE balances each training fold only."""
    folds = check_positive_int(folds, "folds")
    seed = check_seed(seed)
    y_all, kept = dataset.binary()
    X_all = np.asarray(dataset.X)[kept]
    n_spam = int(y_all.sum())
    n_benign = len(y_all) - n_spam
    if min(n_spam, n_benign) < folds:
        raise DataError(
            f"neighborhood {dataset.neighborhood_id}: class counts "
            f"(spam={n_spam}, benign={n_benign}) below fold count {folds}"
        )
    fold_tests = stratified_folds(y_all, folds, derive_seed(seed, "folds"))
    per_fold = []
    for fold_index, test_idx in enumerate(fold_tests):
        mask = np.ones(len(y_all), dtype=bool)
        mask[test_idx] = False
        X_train, y_train = X_all[mask], y_all[mask]
        X_train, y_train = balance_with_smote(
            X_train, y_train, k_neighbors, derive_seed(seed, "smote", fold_index)
        )
        model = train(X_train, y_train, kind, derive_seed(seed, "train", fold_index))
        predicted = model.predict(X_all[test_idx])
        actual = y_all[test_idx]
        tp = int(np.sum((predicted == 1) & (actual == 1)))
        fp = int(np.sum((predicted == 1) & (actual == 0)))
        fn = int(np.sum((predicted == 0) & (actual == 1)))
        tn = int(np.sum((predicted == 0) & (actual == 0)))
        per_fold.append(confusion_metrics(tp, fp, fn, tn))
    means = {
        metric: float(np.mean([fold[metric] for fold in per_fold]))
        for metric in ("accuracy", "precision", "recall", "f1")
    }
    errors = {
        metric: float(
            np.std([fold[metric] for fold in per_fold], ddof=1) / math.sqrt(folds)
        )
        if folds > 1
        else 0.0
        for metric in ("accuracy", "precision", "recall", "f1")
    }
    return EvalReport(
        accuracy=means["accuracy"],
        precision=means["precision"],
        recall=means["recall"],
        f1=means["f1"],
        per_fold=per_fold,
        standard_errors=errors,
    )


def write_labels(labels: Mapping[str, str], path) -> None:
    """CSV "group_id,raw_label", sorted by group id."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("group_id,raw_label\n")
        for group_id in sorted(labels):
            handle.write(f"{group_id},{labels[group_id]}\n")


def read_labels(path) -> dict:
    labels = {}
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        if header != "group_id,raw_label":
            raise DataError(f"{path}: expected header group_id,raw_label")
        for line in handle:
            group_id, label = line.rstrip("\n").rsplit(",", 1)
            if label not in RAW_LABELS:
                raise DataError(f"{path}: unexpected label {label!r}")
            labels[group_id] = label
    return labels


def label_accounts(
    message_counts: Mapping[str, tuple[int, int]], tau: float = 0.4
) -> dict:
    """Label each account spam iff spam_count/total_count >= tau.

    ``message_counts`` maps user -> (spam_count, total_count); users with no
    counted messages are skipped rather than labeled.
    """
    tau = check_fraction(tau, "tau")
    labels = {}
    for user in sorted(message_counts):
        spam_count, total = message_counts[user]
        if total == 0:
            continue
        if spam_count > total or spam_count < 0:
            raise DataError(f"label_accounts: bad counts for {user!r}")
        labels[user] = "spam" if spam_count / total >= tau else "benign"
    return labels
