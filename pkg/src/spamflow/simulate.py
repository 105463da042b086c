"""Early-detection and adversarial (poisoning/evasion) experiments.

All three experiments rewrite per-community observations of spam groups and
re-run classification:

- early detection: counts outside a sampled community subset are zeroed
  (the campaign has not propagated everywhere yet);
- poisoning: inside a sampled "compromised" subset, a spam group's message
  and author counts are replaced with those of a randomly chosen benign
  group, and the contaminated data is cross-validated;
- evasion: same mimicry, but the model trains on clean ground truth and is
  tested on the mimicking spam plus held-out benign rows.

Randomness flows from one experiment seed through derived sub-seeds, so
every run is reproducible bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .classify import (
    LabeledDataset,
    apply_combination,
    balance_with_smote,
    confusion_metrics,
    cross_validate,
    train,
)
from .errors import ConfigError, DataError
from .poi import GroupObservation, ProbTable, assemble_features
from .validation import check_fraction, check_positive_int, check_seed, derive_seed

logger = logging.getLogger(__name__)

__all__ = [
    "SweepPoint",
    "SweepCurve",
    "AttackConfig",
    "AttackOutcome",
    "METRIC_NAMES",
    "mask_spam_observation",
    "poison_counts",
    "run_early_detection",
    "run_poisoning",
    "run_evasion",
    "sweep_attack",
    "average_curves",
    "write_sweep",
    "DEFAULT_FRACTIONS",
    "ATTACK_FRACTIONS",
]

METRIC_NAMES = ("precision", "recall", "f1", "accuracy")
DEFAULT_FRACTIONS = tuple(round(0.1 * i, 1) for i in range(1, 11))
ATTACK_FRACTIONS = (0.0,) + DEFAULT_FRACTIONS


@dataclass(frozen=True)
class SweepPoint:
    fraction: float
    precision: float
    recall: float
    f1: float
    accuracy: float


@dataclass
class SweepCurve:
    points: list
    repetitions: int
    seed: int
    rep_rows: list = field(default_factory=list)  # (fraction, rep, metrics dict)


@dataclass(frozen=True)
class AttackConfig:
    kind: str
    compromised_fraction: float
    repetitions: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("poisoning", "evasion"):
            raise ConfigError(f"attack kind must be poisoning or evasion, got {self.kind!r}")
        check_fraction(self.compromised_fraction, "compromised_fraction")


@dataclass
class AttackOutcome:
    kind: str
    fraction: float
    metrics: dict
    per_rep: list


def mask_spam_observation(
    observation: GroupObservation, observed_communities: Iterable[int]
) -> GroupObservation:
    """Drop counts from communities where the campaign was not yet seen."""
    observed = set(observed_communities)
    kept = {
        community: obs
        for community, obs in observation.per_community.items()
        if community in observed
    }
    return GroupObservation(observation.group_id, kept)


def poison_counts(
    spam_observation: GroupObservation,
    mimic_observation: GroupObservation,
    compromised: Iterable[int],
) -> GroupObservation:
    """Replace the spam group's counts with the mimicked benign group's
    inside compromised communities; elsewhere unchanged."""
    compromised = set(compromised)
    mixed: dict[int, object] = {}
    for community, obs in spam_observation.per_community.items():
        if community not in compromised:
            mixed[community] = obs
    for community, obs in mimic_observation.per_community.items():
        if community in compromised:
            mixed[community] = obs
    return GroupObservation(spam_observation.group_id, dict(sorted(mixed.items())))


def _table_communities(table: ProbTable) -> list[int]:
    communities = {p.community_id for p in table.profiles}
    for observation in table.observations.values():
        communities.update(observation.per_community)
    return sorted(communities)


def _sample_communities(universe: Sequence[int], fraction: float, rng) -> frozenset:
    k = int(fraction * len(universe) + 0.5)
    if k >= len(universe):
        return frozenset(universe)
    if k == 0:
        return frozenset()
    picked = rng.choice(len(universe), size=k, replace=False)
    return frozenset(universe[i] for i in picked)


def _split_rows(table: ProbTable, labels: Mapping[str, str], combination: int):
    """Row ids by binary class, in table row order."""
    row_ids = table.row_ids()
    raw = [labels.get(gid, "unknown") for gid in row_ids]
    y, kept = apply_combination(raw, combination)
    spam_ids = [row_ids[i] for i, label in zip(kept, y) if label == 1]
    benign_ids = [row_ids[i] for i, label in zip(kept, y) if label == 0]
    return spam_ids, benign_ids


def _dataset(table, labels, combination, overrides=None) -> LabeledDataset:
    X = assemble_features(table, overrides)
    row_ids = table.row_ids()
    raw = [labels.get(gid, "unknown") for gid in row_ids]
    return LabeledDataset(
        neighborhood_id=table.neighborhood_id,
        group_ids=row_ids,
        X=X,
        raw_labels=raw,
        combination=combination,
    )


def _check_fractions(fractions) -> tuple:
    fractions = tuple(check_fraction(f) for f in fractions)
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise ConfigError("fractions must be strictly increasing")
    return fractions


def run_early_detection(
    table: ProbTable,
    labels: Mapping[str, str],
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    reps: int = 3,
    seed: int = 0,
    folds: int = 10,
    kind: str = "linear-svm",
    combination: int = 3,
) -> SweepCurve:
    """Mask spam observations down to sampled community subsets and re-run CV.

    Each spam row gets a fresh community sample per repetition and fraction;
    the CV fold seed depends only on the repetition, so fraction 1.0
    reproduces the unmasked baseline exactly.
    """
    fractions = _check_fractions(fractions)
    reps = check_positive_int(reps, "reps")
    seed = check_seed(seed)
    spam_ids, _ = _split_rows(table, labels, combination)
    universe = _table_communities(table)
    rep_rows = []
    for rep in range(reps):
        cv_seed = derive_seed(seed, "cv", rep)
        for fraction_index, fraction in enumerate(fractions):
            overrides = {}
            if fraction < 1.0:
                for gid in spam_ids:
                    rng = np.random.default_rng(
                        derive_seed(seed, "mask", rep, fraction_index, gid)
                    )
                    observed = _sample_communities(universe, fraction, rng)
                    overrides[gid] = mask_spam_observation(
                        table.observations[gid], observed
                    )
            report = cross_validate(
                _dataset(table, labels, combination, overrides),
                folds=folds,
                kind=kind,
                seed=cv_seed,
            )
            rep_rows.append(
                (fraction, rep, {m: getattr(report, m) for m in METRIC_NAMES})
            )
    points = _average_points(fractions, rep_rows)
    return SweepCurve(points=points, repetitions=reps, seed=seed, rep_rows=rep_rows)


def _average_points(fractions, rep_rows) -> list:
    points = []
    for fraction in fractions:
        rows = [m for f, _, m in rep_rows if f == fraction]
        points.append(
            SweepPoint(
                fraction=fraction,
                **{m: float(np.mean([row[m] for row in rows])) for m in METRIC_NAMES},
            )
        )
    return points


def _mimic_overrides(table, spam_ids, benign_ids, compromised, rng) -> dict:
    overrides = {}
    for gid in spam_ids:
        mimic_gid = benign_ids[int(rng.integers(len(benign_ids)))]
        overrides[gid] = poison_counts(
            table.observations[gid], table.observations[mimic_gid], compromised
        )
    return overrides


def run_poisoning(
    table: ProbTable,
    labels: Mapping[str, str],
    fraction: float,
    reps: int = 3,
    seed: int = 0,
    folds: int = 10,
    kind: str = "linear-svm",
    combination: int = 3,
) -> AttackOutcome:
    """Contaminate every spam row's observations and cross-validate.

    One compromised-community sample per repetition; each spam row mimics a
    uniformly drawn benign row from the same table.
    """
    fraction = check_fraction(fraction)
    reps = check_positive_int(reps, "reps")
    seed = check_seed(seed)
    spam_ids, benign_ids = _split_rows(table, labels, combination)
    if not benign_ids:
        raise DataError(
            f"neighborhood {table.neighborhood_id}: no benign rows to mimic"
        )
    universe = _table_communities(table)
    per_rep = []
    for rep in range(reps):
        rng = np.random.default_rng(derive_seed(seed, "poison", rep))
        compromised = _sample_communities(universe, fraction, rng)
        overrides = _mimic_overrides(table, spam_ids, benign_ids, compromised, rng)
        report = cross_validate(
            _dataset(table, labels, combination, overrides),
            folds=folds,
            kind=kind,
            seed=derive_seed(seed, "cv", rep),
        )
        per_rep.append({m: getattr(report, m) for m in METRIC_NAMES})
    metrics = {m: float(np.mean([r[m] for r in per_rep])) for m in METRIC_NAMES}
    return AttackOutcome(kind="poisoning", fraction=fraction, metrics=metrics, per_rep=per_rep)


def run_evasion(
    table: ProbTable,
    labels: Mapping[str, str],
    fraction: float,
    reps: int = 3,
    seed: int = 0,
    kind: str = "linear-svm",
    combination: int = 3,
    k_neighbors: int = 5,
) -> AttackOutcome:
    """Train on clean rows, test on mimicking spam plus held-out benign rows.

    The test set holds all simulated spam rows and an equal count of
    randomly drawn benign rows (capped at half the benign rows so the clean
    training set keeps benign examples); training sees the remaining ground
    truth. One train/test split per repetition.
    """
    fraction = check_fraction(fraction)
    reps = check_positive_int(reps, "reps")
    seed = check_seed(seed)
    spam_ids, benign_ids = _split_rows(table, labels, combination)
    if not benign_ids:
        raise DataError(
            f"neighborhood {table.neighborhood_id}: no benign rows to mimic"
        )
    if not spam_ids:
        raise DataError(f"neighborhood {table.neighborhood_id}: no spam rows")
    universe = _table_communities(table)
    row_index = {gid: i for i, gid in enumerate(table.row_ids())}
    X_clean = assemble_features(table)
    per_rep = []
    for rep in range(reps):
        rng = np.random.default_rng(derive_seed(seed, "evade", rep))
        compromised = _sample_communities(universe, fraction, rng)
        overrides = _mimic_overrides(table, spam_ids, benign_ids, compromised, rng)
        X_sim = assemble_features(table, overrides)
        n_test_benign = min(len(spam_ids), len(benign_ids) // 2)
        if n_test_benign == 0:
            raise DataError(
                f"neighborhood {table.neighborhood_id}: too few benign rows to "
                "hold out a test set"
            )
        picked = rng.choice(len(benign_ids), size=n_test_benign, replace=False)
        test_benign = {benign_ids[i] for i in picked}
        train_ids = spam_ids + [gid for gid in benign_ids if gid not in test_benign]
        X_train = X_clean[[row_index[gid] for gid in train_ids]]
        y_train = np.array([1] * len(spam_ids) + [0] * (len(train_ids) - len(spam_ids)))
        X_train, y_train = balance_with_smote(
            X_train, y_train, k_neighbors, derive_seed(seed, "smote", rep)
        )
        model = train(X_train, y_train, kind, derive_seed(seed, "train", rep))
        X_test = np.concatenate(
            [
                X_sim[[row_index[gid] for gid in spam_ids]],
                X_clean[[row_index[gid] for gid in sorted(test_benign)]],
            ]
        )
        y_test = np.array([1] * len(spam_ids) + [0] * n_test_benign)
        predicted = model.predict(X_test)
        tp = int(np.sum((predicted == 1) & (y_test == 1)))
        fp = int(np.sum((predicted == 1) & (y_test == 0)))
        fn = int(np.sum((predicted == 0) & (y_test == 1)))
        tn = int(np.sum((predicted == 0) & (y_test == 0)))
        per_rep.append({m: confusion_metrics(tp, fp, fn, tn)[m] for m in METRIC_NAMES})
    metrics = {m: float(np.mean([r[m] for r in per_rep])) for m in METRIC_NAMES}
    return AttackOutcome(kind="evasion", fraction=fraction, metrics=metrics, per_rep=per_rep)


def sweep_attack(
    table: ProbTable,
    labels: Mapping[str, str],
    kind: str,
    fractions: Sequence[float] = ATTACK_FRACTIONS,
    reps: int = 3,
    seed: int = 0,
    folds: int = 10,
    classifier: str = "linear-svm",
    combination: int = 3,
) -> SweepCurve:
    """Run one attack across a fraction grid and collect the curve."""
    fractions = _check_fractions(fractions)
    rep_rows = []
    for fraction in fractions:
        if kind == "poisoning":
            outcome = run_poisoning(
                table, labels, fraction, reps, seed, folds, classifier, combination
            )
        elif kind == "evasion":
            outcome = run_evasion(
                table, labels, fraction, reps, seed, classifier, combination
            )
        else:
            raise ConfigError(f"attack kind must be poisoning or evasion, got {kind!r}")
        for rep, metrics in enumerate(outcome.per_rep):
            rep_rows.append((fraction, rep, metrics))
    points = _average_points(fractions, rep_rows)
    return SweepCurve(points=points, repetitions=reps, seed=seed, rep_rows=rep_rows)


def average_curves(curves: Sequence[SweepCurve]) -> SweepCurve:
    """Average several neighborhoods' curves point-by-point."""
    if not curves:
        raise DataError("average_curves: no curves to average")
    first = curves[0]
    fractions = [p.fraction for p in first.points]
    for curve in curves[1:]:
        if [p.fraction for p in curve.points] != fractions:
            raise DataError("average_curves: fraction grids differ")
    rep_rows = []
    for fraction in fractions:
        for rep in range(first.repetitions):
            rows = [
                metrics
                for curve in curves
                for f, r, metrics in curve.rep_rows
                if f == fraction and r == rep
            ]
            rep_rows.append(
                (fraction, rep, {m: float(np.mean([row[m] for row in rows])) for m in METRIC_NAMES})
            )
    points = _average_points(fractions, rep_rows)
    return SweepCurve(
        points=points, repetitions=first.repetitions, seed=first.seed, rep_rows=rep_rows
    )


def write_sweep(curve: SweepCurve, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("fraction,rep,precision,recall,f1,accuracy\n")
        for fraction, rep, metrics in curve.rep_rows:
            handle.write(
                f"{fraction!r},{rep},"
                + ",".join(repr(metrics[m]) for m in METRIC_NAMES)
                + "\n"
            )
        for point in curve.points:
            handle.write(
                f"{point.fraction!r},mean,"
                + ",".join(
                    repr(getattr(point, m)) for m in METRIC_NAMES
                )
                + "\n"
            )
