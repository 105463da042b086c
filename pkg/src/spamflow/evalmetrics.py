"""Entropy-based agreement between communities and topic labels.

Homogeneity here asks whether each topic is confined to a single community
(h = 1 - H(C|T)/H(C)); completeness asks whether each community sticks to a
single topic (c = 1 - H(T|C)/H(T)); V is their harmonic mean. Entropies are
natural-log. A two-sample Z-test compares per-neighborhood scores against
the size-preserving null regrouping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "Contingency",
    "NeighborhoodScores",
    "ZTestResult",
    "ValidationReport",
    "contingency",
    "homogeneity_completeness_v",
    "z_test",
    "compare_to_null",
    "write_validation_report",
]


@dataclass(frozen=True)
class Contingency:
    """counts[i][j] = documents in community i labeled with topic j."""

    counts: np.ndarray
    community_ids: tuple
    topic_ids: tuple

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def contingency(membership: Mapping[str, int], labels: Mapping[str, int]) -> Contingency:
    """Cross-tabulate documents by community and topic label."""
    if set(membership) != set(labels):
        only = set(membership) ^ set(labels)
        raise DataError(
            f"contingency: {len(only)} documents present in only one mapping "
            f"(e.g. {sorted(only)[0]!r})"
        )
    community_ids = tuple(sorted(set(membership.values())))
    topic_ids = tuple(sorted(set(labels.values())))
    c_index = {c: i for i, c in enumerate(community_ids)}
    t_index = {t: j for j, t in enumerate(topic_ids)}
    counts = np.zeros((len(community_ids), len(topic_ids)), dtype=np.int64)
    for doc, community in membership.items():
        counts[c_index[community], t_index[labels[doc]]] += 1
    return Contingency(counts, community_ids, topic_ids)


def _entropy(counts: np.ndarray, total: float) -> float:
    positive = counts[counts > 0]
    return float(-np.sum(positive / total * np.log(positive / total)))


def _conditional_entropy(counts: np.ndarray, conditioning_marginal: np.ndarray) -> float:
    # H(rows | columns) when conditioning_marginal is the column sums.
    total = counts.sum()
    value = 0.0
    for j in range(counts.shape[1]):
        column = counts[:, j]
        n_j = conditioning_marginal[j]
        for n_ij in column[column > 0]:
            value -= n_ij / total * math.log(n_ij / n_j)
    return value


def homogeneity_completeness_v(table: Contingency) -> tuple[float, float, float]:
    """(h, c, V) with communities as classes and topics as clusters."""
    counts = np.asarray(table.counts, dtype=float)
    total = counts.sum()
    if total < 1:
        raise DataError("homogeneity_completeness_v: table is empty")
    community_marginal = counts.sum(axis=1)
    topic_marginal = counts.sum(axis=0)
    h_c = _entropy(community_marginal, total)
    h_t = _entropy(topic_marginal, total)
    h_c_given_t = _conditional_entropy(counts, topic_marginal)
    h_t_given_c = _conditional_entropy(counts.T, community_marginal)
    h = 1.0 if h_c == 0.0 else 1.0 - h_c_given_t / h_c
    c = 1.0 if h_t == 0.0 else 1.0 - h_t_given_c / h_t
    v = 0.0 if h + c == 0.0 else 2.0 * h * c / (h + c)
    return float(h), float(c), float(v)


@dataclass(frozen=True)
class NeighborhoodScores:
    neighborhood_id: str
    h: float
    c: float
    v: float


@dataclass(frozen=True)
class ZTestResult:
    z: float
    p: float
    degenerate: bool = False


def z_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> ZTestResult:
    """Two-sample Z-statistic on means with pooled standard error, two-sided.

    Equal means with zero pooled variance give (0, 1); differing means with
    zero variance are reported degenerate.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise DataError("z_test: both samples need at least two values")
    diff = float(a.mean() - b.mean())
    pooled_var = ((len(a) - 1) * a.var(ddof=1) + (len(b) - 1) * b.var(ddof=1)) / (
        len(a) + len(b) - 2
    )
    se = math.sqrt(pooled_var * (1.0 / len(a) + 1.0 / len(b)))
    if se == 0.0:
        if diff == 0.0:
            return ZTestResult(z=0.0, p=1.0)
        return ZTestResult(z=math.copysign(math.inf, diff), p=math.nan, degenerate=True)
    z = diff / se
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return ZTestResult(z=z, p=p)


@dataclass
class ValidationReport:
    actual: list
    null: list
    h_test: ZTestResult
    c_test: ZTestResult


def compare_to_null(
    actual_scores: Sequence[NeighborhoodScores],
    null_scores: Sequence[NeighborhoodScores],
) -> ValidationReport:
    if len(actual_scores) < 2 or len(null_scores) < 2:
        raise DataError("compare_to_null: need at least two neighborhoods per side")
    h_test = z_test([s.h for s in actual_scores], [s.h for s in null_scores])
    c_test = z_test([s.c for s in actual_scores], [s.c for s in null_scores])
    return ValidationReport(
        actual=list(actual_scores), null=list(null_scores), h_test=h_test, c_test=c_test
    )


def write_validation_report(report: ValidationReport, path) -> None:
    null_by_id = {s.neighborhood_id: s for s in report.null}
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("neighborhood_id,h_actual,c_actual,v_actual,h_null,c_null,v_null\n")
        for scores in report.actual:
            null = null_by_id[scores.neighborhood_id]
            handle.write(
                ",".join(
                    [scores.neighborhood_id]
                    + [
                        repr(float(x))
                        for x in (scores.h, scores.c, scores.v, null.h, null.c, null.v)
                    ]
                )
                + "\n"
            )
        handle.write(
            f"summary,z_h={float(report.h_test.z)!r},p_h={float(report.h_test.p)!r},"
            f"z_c={float(report.c_test.z)!r},p_c={float(report.c_test.p)!r},"
            f"degenerate={report.h_test.degenerate or report.c_test.degenerate},\n"
        )
