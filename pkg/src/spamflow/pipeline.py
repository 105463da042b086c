"""Per-neighborhood orchestration of the full detection pipeline.

A run walks each neighborhood directory through ingest, graph building with
k-core reduction, community detection, topic modelling, near-duplicate
grouping, probability-table construction and classification, persisting the
documented intermediate formats along the way. A stage failure abandons that
neighborhood only; the run report records the reason.

All stage seeds derive from (config.seed, neighborhood, stage), so results
do not depend on processing order and neighborhoods can run in parallel.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .classify import (
    LabeledDataset,
    balance_with_smote,
    cross_validate,
    label_accounts,
    read_labels,
    train,
)
from .communities import detect_communities
from .errors import ConfigError, DataError, SpamflowError
from .evalmetrics import (
    NeighborhoodScores,
    ValidationReport,
    compare_to_null,
    contingency,
    homogeneity_completeness_v,
)
from .graph import (
    build_graphs,
    k_core,
    null_partition,
    read_edge_list,
    read_partition,
    write_partition,
)
from .grouping import group_similar, read_groups, write_groups
from .ingest import (
    build_documents,
    clean_and_tokenize,
    load_stopwords,
    read_documents,
    read_timelines,
    write_documents,
)
from .poi import assemble_features, build_prob_table, write_observations, write_prob_table
from .topics import (
    GibbsLDA,
    community_topics,
    label_documents,
    read_community_topics,
    read_doc_labels,
    save_model,
    write_community_topics,
    write_doc_labels,
)
from .validation import (
    check_fraction,
    check_non_negative_int,
    check_positive_int,
    check_seed,
    derive_seed,
)

logger = logging.getLogger(__name__)

__all__ = [
    "PipelineConfig",
    "load_config",
    "discover_neighborhoods",
    "run_neighborhood",
    "run_pipeline",
    "validate_h1",
    "MIN_LABELED_PER_CLASS",
]

EDGES_NAME = "edges.tsv"
TIMELINES_NAME = "timelines.jsonl"
LABELS_NAME = "labels.csv"

# A neighborhood enters classification only with at least this many labeled
# groups on each side of the binary combination.
MIN_LABELED_PER_CLASS = 10

_METRICS = ("accuracy", "precision", "recall", "f1")


@dataclass
class PipelineConfig:
    data_dir: str
    output_dir: str
    neighborhoods: tuple = ()
    length: int = 20
    k_core: int = 2
    n_topics: int = 500
    lda_iterations: int = 200
    alpha: float | None = None
    beta: float = 0.01
    combination: int = 3
    classifier: str = "linear-svm"
    folds: int = 10
    tau: float = 0.4
    seed: int = 0
    per_user_cap: int = 300
    graph: str = "directed"
    community_method: str = "map-equation"
    restarts: int = 10
    stopwords_path: str | None = None
    workers: int = 1
    resume: bool = False

    def __post_init__(self):
        if not self.data_dir:
            raise ConfigError("data_dir is required")
        if not self.output_dir:
            raise ConfigError("output_dir is required")
        self.neighborhoods = tuple(self.neighborhoods)
        for name in ("length", "n_topics", "folds", "restarts", "per_user_cap", "workers"):
            check_positive_int(getattr(self, name), name)
        check_non_negative_int(self.k_core, "k_core")
        check_non_negative_int(self.lda_iterations, "lda_iterations")
        if self.combination not in (1, 2, 3):
            raise ConfigError(f"combination must be 1, 2 or 3, got {self.combination}")
        if self.classifier not in ("linear-svm", "gaussian-nb"):
            raise ConfigError(f"unknown classifier {self.classifier!r}")
        if self.graph not in ("directed", "undirected"):
            raise ConfigError(f"graph must be 'directed' or 'undirected', got {self.graph!r}")
        if self.community_method not in ("map-equation", "modularity"):
            raise ConfigError(f"unknown community method {self.community_method!r}")
        check_fraction(self.tau, "tau")
        check_seed(self.seed)
        if self.alpha is not None and not self.alpha > 0:
            raise ConfigError("alpha must be positive when given")
        if not self.beta > 0:
            raise ConfigError("beta must be positive")


def load_config(path, **overrides) -> PipelineConfig:
    """PipelineConfig from a JSON file; keyword overrides win over the file."""
    with open(path, encoding="utf-8") as handle:
        try:
            raw = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    known = set(PipelineConfig.__dataclass_fields__)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {unknown}")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    missing = [k for k in ("data_dir", "output_dir") if k not in raw]
    if missing:
        raise ConfigError(f"{path}: missing required keys {missing}")
    return PipelineConfig(**raw)


def config_to_dict(config: PipelineConfig) -> dict:
    record = asdict(config)
    record["neighborhoods"] = list(config.neighborhoods)
    return record


def discover_neighborhoods(data_dir) -> list[str]:
    """Subdirectories of data_dir that contain a timeline file."""
    root = Path(data_dir)
    if not root.is_dir():
        raise ConfigError(f"data directory {root} does not exist")
    return sorted(
        p.name for p in root.iterdir() if p.is_dir() and (p / TIMELINES_NAME).exists()
    )


def _file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(config: PipelineConfig, neighborhoods, path) -> dict:
    inputs = {}
    for nb in neighborhoods:
        nb_dir = Path(config.data_dir) / nb
        entry = {}
        for name in (EDGES_NAME, TIMELINES_NAME, LABELS_NAME):
            file_path = nb_dir / name
            if file_path.exists():
                entry[name] = _file_digest(file_path)
        inputs[nb] = entry
    manifest = {
        "tool": "spamflow",
        "format": 1,
        "config": config_to_dict(config),
        "inputs": inputs,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, sort_keys=True, indent=2)
        handle.write("\n")
    return manifest


@dataclass
class _StageData:
    """In-memory products handed from one stage to the next."""

    documents: list = field(default_factory=list)
    docs_dropped: int = 0
    token_messages: list = field(default_factory=list)
    author_of: dict = field(default_factory=dict)
    n_messages: int = 0
    n_users: int = 0
    truncated: int = 0
    malformed: int = 0


def _stage_ingest(config: PipelineConfig, in_dir: Path, out_dir: Path, stopwords) -> _StageData:
    timelines_path = in_dir / TIMELINES_NAME
    if not timelines_path.exists():
        raise DataError(f"missing input file {timelines_path}")
    timelines, report = read_timelines(timelines_path, config.per_user_cap)
    data = _StageData(
        n_messages=report.n_messages,
        n_users=len(timelines),
        truncated=report.truncated,
        malformed=len(report.malformed),
    )

    def topic_tokens(text: str) -> list[str]:
        return clean_and_tokenize(text, stopwords, mode="topic")

    documents = []
    for timeline in timelines:
        documents.extend(build_documents(timeline, config.length, tokenize=topic_tokens))
        for message in timeline.messages:
            data.author_of[message.message_id] = message.author
            data.token_messages.append(
                (message.message_id, clean_and_tokenize(message.text, stopwords, mode="grouping"))
            )
    data.documents = [d for d in documents if d.tokens]
    data.docs_dropped = len(documents) - len(data.documents)
    if data.docs_dropped:
        logger.info("%s: dropped %d empty documents", in_dir.name, data.docs_dropped)
    write_documents(data.documents, out_dir / "documents.jsonl")
    return data


def _stage_graph(config: PipelineConfig, nb: str, in_dir: Path, out_dir: Path):
    partition_path = out_dir / "partition.csv"
    if config.resume and partition_path.exists():
        return read_partition(partition_path)
    edges_path = in_dir / EDGES_NAME
    if not edges_path.exists():
        raise DataError(f"missing input file {edges_path}")
    directed, mutual = build_graphs(read_edge_list(edges_path))
    base = directed if config.graph == "directed" else mutual
    core = k_core(base, config.k_core)
    partition = detect_communities(
        core,
        method=config.community_method,
        seed=derive_seed(config.seed, nb, "communities"),
        restarts=config.restarts,
    )
    write_partition(partition, partition_path)
    return partition


def _stage_topics(config: PipelineConfig, nb: str, out_dir: Path, documents, membership):
    labels_path = out_dir / "doc_labels.csv"
    profile_path = out_dir / "community_topics.csv"
    if config.resume and labels_path.exists() and profile_path.exists():
        doc_labels = read_doc_labels(labels_path)
        profiles, unassigned = read_community_topics(profile_path)
        return doc_labels, profiles, unassigned
    model = GibbsLDA(
        n_topics=config.n_topics,
        iterations=config.lda_iterations,
        alpha=config.alpha,
        beta=config.beta,
        seed=derive_seed(config.seed, nb, "lda"),
    ).fit(documents)
    save_model(model, out_dir / "model.txt")
    doc_labels = label_documents(model)
    write_doc_labels(doc_labels, labels_path)
    doc_users = {d.doc_id: d.user for d in documents}
    profiles, unassigned = community_topics(doc_labels, doc_users, membership)
    write_community_topics(profiles, unassigned, profile_path)
    return doc_labels, profiles, unassigned


def _stage_groups(config: PipelineConfig, out_dir: Path, data: _StageData):
    groups_path = out_dir / "groups.csv"
    if config.resume and groups_path.exists():
        return read_groups(groups_path, data.author_of)
    groups = group_similar(data.token_messages, author_of=data.author_of)
    write_groups(groups, groups_path)
    return groups


def _stage_classify(config: PipelineConfig, nb: str, out_dir: Path, table, groups, labels, author_of):
    raw_labels = [labels.get(group_id, "unknown") for group_id in table.row_ids()]
    X = assemble_features(table)
    dataset = LabeledDataset(nb, table.row_ids(), X, raw_labels, config.combination)
    y, kept = dataset.binary()
    n_spam = int(y.sum())
    n_benign = len(y) - n_spam
    if min(n_spam, n_benign) < MIN_LABELED_PER_CLASS:
        raise DataError(
            f"neighborhood {nb}: needs at least {MIN_LABELED_PER_CLASS} labeled groups "
            f"per class, got spam={n_spam} benign={n_benign}"
        )
    report = cross_validate(
        dataset,
        folds=config.folds,
        kind=config.classifier,
        seed=derive_seed(config.seed, nb, "cv"),
    )

    # Final model on all labeled rows, then account labels from its predictions.
    X_kept = X[kept]
    X_balanced, y_balanced = balance_with_smote(
        X_kept, y, seed=derive_seed(config.seed, nb, "final-smote")
    )
    model = train(
        X_balanced, y_balanced, config.classifier, derive_seed(config.seed, nb, "final-train")
    )
    predictions = model.predict(X_kept)
    kept_ids = [table.row_ids()[i] for i in kept]
    groups_by_id = {group.group_id: group for group in groups}
    message_counts: dict[str, tuple[int, int]] = {}
    with open(out_dir / "group_predictions.csv", "w", encoding="utf-8") as handle:
        handle.write("group_id,predicted\n")
        for group_id, predicted in zip(kept_ids, predictions):
            handle.write(f"{group_id},{'spam' if predicted else 'benign'}\n")
            for message_id in sorted(groups_by_id[group_id].message_ids):
                user = author_of.get(message_id)
                if user is None:
                    continue
                spam_count, total = message_counts.get(user, (0, 0))
                message_counts[user] = (spam_count + int(predicted), total + 1)
    accounts = label_accounts(message_counts, config.tau)
    with open(out_dir / "accounts.csv", "w", encoding="utf-8") as handle:
        handle.write("user_id,label\n")
        for user in sorted(accounts):
            handle.write(f"{user},{accounts[user]}\n")
    counts = {
        "labeled_spam_groups": n_spam,
        "labeled_benign_groups": n_benign,
        "accounts_labeled": len(accounts),
        "accounts_spam": sum(1 for v in accounts.values() if v == "spam"),
    }
    return report, counts


def run_neighborhood(config: PipelineConfig, nb: str) -> dict:
    """All stages for one neighborhood; returns its report fragment."""
    in_dir = Path(config.data_dir) / nb
    out_dir = Path(config.output_dir) / nb
    out_dir.mkdir(parents=True, exist_ok=True)
    stopwords = (
        load_stopwords(config.stopwords_path) if config.stopwords_path else frozenset()
    )
    try:
        data = _stage_ingest(config, in_dir, out_dir, stopwords)
        partition = _stage_graph(config, nb, in_dir, out_dir)
        membership = partition.membership()
        doc_labels, profiles, unassigned = _stage_topics(
            config, nb, out_dir, data.documents, membership
        )
        groups = _stage_groups(config, out_dir, data)
        table = build_prob_table(groups, profiles, membership, nb, data.author_of)
        write_prob_table(table, out_dir / "prob_table.csv")
        write_observations(table, out_dir / "observations.csv")
        labels_path = in_dir / LABELS_NAME
        if not labels_path.exists():
            raise DataError(f"missing input file {labels_path}")
        labels = read_labels(labels_path)
        report, class_counts = _stage_classify(
            config, nb, out_dir, table, groups, labels, data.author_of
        )
    except SpamflowError as exc:
        logger.warning("neighborhood %s skipped: %s", nb, exc)
        return {"neighborhood": nb, "status": "skipped", "reason": str(exc)}
    counts = {
        "messages": data.n_messages,
        "users": data.n_users,
        "truncated_messages": data.truncated,
        "malformed_records": data.malformed,
        "documents": len(data.documents),
        "documents_dropped": data.docs_dropped,
        "core_vertices": len(partition.vertex_set()),
        "communities": len(partition.communities),
        "docs_unassigned": sum(unassigned.topic_counts.values()),
        "groups": len(groups),
        "table_rows": len(table.rows),
        "table_skipped_messages": table.report.skipped_messages,
    }
    counts.update(class_counts)
    fragment = {
        "neighborhood": nb,
        "status": "ok",
        "counts": counts,
        "metrics": report.as_dict(),
    }
    with open(out_dir / "report.json", "w", encoding="utf-8") as handle:
        json.dump(fragment, handle, sort_keys=True, indent=2)
        handle.write("\n")
    return fragment


def _run_neighborhood_args(args) -> dict:
    return run_neighborhood(*args)


def run_pipeline(config: PipelineConfig) -> dict:
    """Run every neighborhood and write manifest.json plus report.json.

    Reports are free of timestamps and machine details, so two runs with the
    same inputs, config and seed produce byte-identical artifacts.
    """
    neighborhoods = list(config.neighborhoods) or discover_neighborhoods(config.data_dir)
    if not neighborhoods:
        raise DataError(f"no neighborhoods found under {config.data_dir}")
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(config, neighborhoods, output_dir / "manifest.json")
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            fragments = list(
                pool.map(_run_neighborhood_args, [(config, nb) for nb in neighborhoods])
            )
    else:
        fragments = [run_neighborhood(config, nb) for nb in neighborhoods]
    evaluated = [f for f in fragments if f["status"] == "ok"]
    averages = {}
    if evaluated:
        for metric in _METRICS:
            averages[metric] = float(
                np.mean([f["metrics"][metric] for f in evaluated])
            )
    report = {
        "config": config_to_dict(config),
        "neighborhoods": {f["neighborhood"]: f for f in fragments},
        "averages": averages,
        "evaluated": sorted(f["neighborhood"] for f in evaluated),
        "skipped": {
            f["neighborhood"]: f["reason"] for f in fragments if f["status"] == "skipped"
        },
    }
    with open(output_dir / "report.json", "w", encoding="utf-8") as handle:
        json.dump(report, handle, sort_keys=True, indent=2)
        handle.write("\n")
    logger.info(
        "pipeline: %d evaluated, %d skipped", len(evaluated), len(report["skipped"])
    )
    return report


def _h1_scores(output_dir: Path, nb: str, seed: int):
    nb_dir = output_dir / nb
    for name in ("partition.csv", "doc_labels.csv", "documents.jsonl"):
        if not (nb_dir / name).exists():
            raise DataError(f"{nb_dir / name} missing; run the pipeline first")
    partition = read_partition(nb_dir / "partition.csv")
    membership = partition.membership()
    owner = {d.doc_id: d.user for d in read_documents(nb_dir / "documents.jsonl")}
    doc_community = {}
    doc_topic = {}
    for label in read_doc_labels(nb_dir / "doc_labels.csv"):
        community = membership.get(owner.get(label.doc_id))
        if community is None:
            continue
        doc_community[label.doc_id] = community
        doc_topic[label.doc_id] = label.topic
    if len(doc_community) < 2:
        raise DataError(f"neighborhood {nb}: fewer than two community-assigned documents")
    h, c, v = homogeneity_completeness_v(contingency(doc_community, doc_topic))
    actual = NeighborhoodScores(nb, h, c, v)

    communities = sorted(set(doc_community.values()))
    sizes = [sum(1 for value in doc_community.values() if value == c) for c in communities]
    shuffled = null_partition(sizes, sorted(doc_community), derive_seed(seed, nb, "null"))
    null_membership = {
        doc: index for index, docs in enumerate(shuffled) for doc in docs
    }
    h, c, v = homogeneity_completeness_v(contingency(null_membership, doc_topic))
    return actual, NeighborhoodScores(nb, h, c, v)


def validate_h1(config: PipelineConfig, neighborhoods=None) -> ValidationReport:
    """Compare per-neighborhood homogeneity/completeness against null splits.

    Reads the intermediates a previous run persisted under config.output_dir.
    The null model regroups each neighborhood's documents at random into
    groups of the original community sizes.
    """
    output_dir = Path(config.output_dir)
    if neighborhoods is None:
        neighborhoods = list(config.neighborhoods) or discover_neighborhoods(config.data_dir)
    actual_scores = []
    null_scores = []
    for nb in neighborhoods:
        actual, null = _h1_scores(output_dir, nb, config.seed)
        actual_scores.append(actual)
        null_scores.append(null)
    return compare_to_null(actual_scores, null_scores)
