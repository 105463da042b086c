"""Command line entry point.

Subcommands wrap individual pipeline stages around the documented file
formats, plus `run` for the full per-neighborhood pipeline and `synth` for
generating test data. Exit codes: 0 success, 1 configuration error, 2 data
error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .classify import LabeledDataset, cross_validate, read_labels
from .communities import detect_communities
from .errors import ConfigError, DataError, SpamflowError
from .evalmetrics import write_validation_report
from .graph import build_graphs, k_core, read_edge_list, read_partition, write_partition
from .grouping import group_similar, read_groups, write_groups
from .ingest import (
    build_documents,
    clean_and_tokenize,
    load_stopwords,
    read_documents,
    read_timelines,
    write_documents,
)
from .pipeline import PipelineConfig, load_config, run_pipeline, validate_h1
from .poi import (
    build_prob_table,
    read_observations,
    read_prob_table,
    table_from_observations,
    write_observations,
    write_prob_table,
)
from .simulate import ATTACK_FRACTIONS, run_early_detection, sweep_attack, write_sweep
from .synth import SynthConfig, generate_dataset
from .topics import (
    GibbsLDA,
    community_topics,
    label_documents,
    read_community_topics,
    save_model,
    write_community_topics,
    write_doc_labels,
)

logger = logging.getLogger(__name__)

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


def _comma_list(value: str) -> tuple:
    return tuple(part for part in value.split(",") if part)


def _comma_floats(value: str) -> tuple:
    try:
        return tuple(float(part) for part in value.split(",") if part)
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated floats, got {value!r}") from exc


def _stopwords(args) -> frozenset:
    return load_stopwords(args.stopwords) if args.stopwords else frozenset()


def _read_timelines_arg(args):
    timelines, report = read_timelines(args.timelines, args.cap)
    if report.malformed:
        logger.warning("%d malformed records skipped", len(report.malformed))
    return timelines, report


# --- subcommand handlers -------------------------------------------------


def _cmd_run(args) -> int:
    overrides = {
        "data_dir": args.data_dir,
        "output_dir": args.output_dir,
        "neighborhoods": args.neighborhoods,
        "length": args.length,
        "k_core": args.k_core,
        "n_topics": args.topics,
        "lda_iterations": args.iterations,
        "alpha": args.alpha,
        "beta": args.beta,
        "combination": args.combination,
        "classifier": args.classifier,
        "folds": args.folds,
        "tau": args.tau,
        "seed": args.seed,
        "per_user_cap": args.cap,
        "graph": args.graph,
        "community_method": args.method,
        "restarts": args.restarts,
        "stopwords_path": args.stopwords,
        "workers": args.workers,
        "resume": args.resume,
    }
    if args.config:
        config = load_config(args.config, **overrides)
    else:
        provided = {k: v for k, v in overrides.items() if v is not None}
        if "data_dir" not in provided or "output_dir" not in provided:
            raise ConfigError("--config or both --data-dir and --output-dir are required")
        config = PipelineConfig(**provided)
    report = run_pipeline(config)
    for nb, reason in sorted(report["skipped"].items()):
        print(f"{nb}: skipped ({reason})")
    for nb in report["evaluated"]:
        metrics = report["neighborhoods"][nb]["metrics"]
        print(
            f"{nb}: precision={metrics['precision']:.4f} recall={metrics['recall']:.4f} "
            f"f1={metrics['f1']:.4f} accuracy={metrics['accuracy']:.4f}"
        )
    if report["averages"]:
        avg = report["averages"]
        print(
            f"average over {len(report['evaluated'])} neighborhoods: "
            f"precision={avg['precision']:.4f} recall={avg['recall']:.4f} "
            f"f1={avg['f1']:.4f} accuracy={avg['accuracy']:.4f}"
        )
    print(f"report written to {Path(config.output_dir) / 'report.json'}")
    return 0


def _cmd_ingest(args) -> int:
    stopwords = _stopwords(args)
    timelines, report = _read_timelines_arg(args)

    def topic_tokens(text: str) -> list[str]:
        return clean_and_tokenize(text, stopwords, mode="topic")

    documents = []
    for timeline in timelines:
        documents.extend(build_documents(timeline, args.length, tokenize=topic_tokens))
    kept = [d for d in documents if d.tokens]
    write_documents(kept, args.out_documents)
    print(
        f"{report.n_messages} messages from {len(timelines)} users -> "
        f"{len(kept)} documents ({len(documents) - len(kept)} empty dropped)"
    )
    return 0


def _cmd_graph(args) -> int:
    directed, mutual = build_graphs(read_edge_list(args.edges))
    base = directed if args.graph == "directed" else mutual
    core = k_core(base, args.k_core)
    partition = detect_communities(
        core, method=args.method, seed=args.seed, restarts=args.restarts
    )
    write_partition(partition, args.out_partition)
    print(
        f"{base.n_vertices} vertices -> {core.n_vertices} in the {args.k_core}-core, "
        f"{len(partition.communities)} communities"
    )
    return 0


def _cmd_topics(args) -> int:
    documents = read_documents(args.documents)
    kept = [d for d in documents if d.tokens]
    if len(kept) < len(documents):
        logger.warning("dropped %d empty documents", len(documents) - len(kept))
    model = GibbsLDA(
        n_topics=args.topics,
        iterations=args.iterations,
        alpha=args.alpha,
        beta=args.beta,
        seed=args.seed,
    ).fit(kept)
    save_model(model, args.out_model)
    labels = label_documents(model)
    write_doc_labels(labels, args.out_doc_labels)
    membership = read_partition(args.partition).membership()
    doc_users = {d.doc_id: d.user for d in kept}
    profiles, unassigned = community_topics(labels, doc_users, membership)
    write_community_topics(profiles, unassigned, args.out_community_topics)
    print(
        f"{len(kept)} documents, {len(profiles)} communities with topics, "
        f"{sum(unassigned.topic_counts.values())} documents unassigned"
    )
    return 0


def _cmd_groups(args) -> int:
    stopwords = _stopwords(args)
    timelines, _report = _read_timelines_arg(args)
    token_messages = []
    author_of = {}
    for timeline in timelines:
        for message in timeline.messages:
            author_of[message.message_id] = message.author
            token_messages.append(
                (message.message_id, clean_and_tokenize(message.text, stopwords, mode="grouping"))
            )
    groups = group_similar(token_messages, author_of=author_of)
    write_groups(groups, args.out_groups)
    grouped = sum(group.size for group in groups)
    print(f"{len(groups)} groups covering {grouped} of {len(token_messages)} messages")
    return 0


def _cmd_poi(args) -> int:
    timelines, _report = _read_timelines_arg(args)
    author_of = {
        message.message_id: message.author
        for timeline in timelines
        for message in timeline.messages
    }
    groups = read_groups(args.groups, author_of)
    membership = read_partition(args.partition).membership()
    profiles, _unassigned = read_community_topics(args.community_topics)
    table = build_prob_table(groups, profiles, membership, args.neighborhood, author_of)
    write_prob_table(table, args.out_table)
    write_observations(table, args.out_observations)
    report = table.report
    print(
        f"{len(table.rows)} rows over {len(table.topic_axis)} topics "
        f"({report.empty_groups} empty groups, {report.skipped_messages} messages skipped)"
    )
    if report.zero_topic_communities:
        print(f"communities without topics: {list(report.zero_topic_communities)}")
    return 0


def _cmd_train(args) -> int:
    group_ids, X, _axis = read_prob_table(args.table)
    labels = read_labels(args.labels)
    raw = [labels.get(gid, "unknown") for gid in group_ids]
    dataset = LabeledDataset(args.neighborhood, group_ids, X, raw, args.combination)
    report = cross_validate(
        dataset, folds=args.folds, kind=args.classifier, seed=args.seed
    )
    record = report.as_dict()
    if args.out_report:
        with open(args.out_report, "w", encoding="utf-8") as handle:
            json.dump(record, handle, sort_keys=True, indent=2)
            handle.write("\n")
    print(
        f"{args.folds}-fold CV ({args.classifier}, combination {args.combination}): "
        f"precision={report.precision:.4f} recall={report.recall:.4f} "
        f"f1={report.f1:.4f} accuracy={report.accuracy:.4f}"
    )
    return 0


def _cmd_validate_h1(args) -> int:
    config = PipelineConfig(
        data_dir=args.data_dir,
        output_dir=args.output_dir,
        neighborhoods=args.neighborhoods or (),
        seed=args.seed,
    )
    report = validate_h1(config)
    write_validation_report(report, args.out_report)
    mean_h = sum(s.h for s in report.actual) / len(report.actual)
    mean_null = sum(s.h for s in report.null) / len(report.null)
    print(
        f"homogeneity actual={mean_h:.4f} null={mean_null:.4f} "
        f"z={report.h_test.z:.4f} p={report.h_test.p:.3e}"
    )
    return 0


def _load_sim_table(args):
    observations = read_observations(args.observations)
    profiles, _unassigned = read_community_topics(args.community_topics)
    table = table_from_observations(args.neighborhood, observations, profiles)
    labels = read_labels(args.labels)
    return table, labels


def _cmd_simulate_early(args) -> int:
    table, labels = _load_sim_table(args)
    curve = run_early_detection(
        table,
        labels,
        reps=args.reps,
        seed=args.seed,
        folds=args.folds,
        kind=args.classifier,
        combination=args.combination,
    )
    write_sweep(curve, args.out_curve)
    for point in curve.points:
        print(
            f"fraction={point.fraction:.1f} precision={point.precision:.4f} "
            f"recall={point.recall:.4f} f1={point.f1:.4f}"
        )
    return 0


def _cmd_simulate_attack(args) -> int:
    table, labels = _load_sim_table(args)
    if args.fraction is not None:
        fractions = (args.fraction,)
    elif args.fractions is not None:
        fractions = args.fractions
    else:
        fractions = ATTACK_FRACTIONS
    curve = sweep_attack(
        table,
        labels,
        kind=args.kind,
        fractions=fractions,
        reps=args.reps,
        seed=args.seed,
        folds=args.folds,
        classifier=args.classifier,
        combination=args.combination,
    )
    write_sweep(curve, args.out_curve)
    for point in curve.points:
        print(f"{args.kind} fraction={point.fraction:.1f} f1={point.f1:.4f}")
    return 0


def _cmd_synth(args) -> int:
    kwargs = {
        "n_communities": args.communities,
        "community_size": args.community_size,
        "p_in": args.p_in,
        "p_out": args.p_out,
        "n_topics": args.topics,
        "vocab_per_topic": args.vocab,
        "docs_per_user": args.docs_per_user,
        "n_benign_groups": args.benign_groups,
        "n_spam_groups": args.spam_groups,
        "seed": args.seed,
    }
    if args.min_group_size is not None or args.max_group_size is not None:
        lo = args.min_group_size if args.min_group_size is not None else 10
        hi = args.max_group_size if args.max_group_size is not None else 60
        kwargs["group_size_range"] = (lo, hi)
    cfg = SynthConfig(**{k: v for k, v in kwargs.items() if v is not None})
    directories = generate_dataset(cfg, args.neighborhoods, args.out_dir)
    print(f"wrote {len(directories)} neighborhoods under {args.out_dir}")
    return 0


# --- parser construction --------------------------------------------------


def _add_seed(parser, default=0):
    parser.add_argument("--seed", type=int, default=default, help="RNG seed")


def _add_classifier_args(parser):
    parser.add_argument("--combination", type=int, default=3, choices=(1, 2, 3))
    parser.add_argument(
        "--classifier", default="linear-svm", choices=("linear-svm", "gaussian-nb")
    )
    parser.add_argument("--folds", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spamflow", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    run = commands.add_parser("run", help="full pipeline over neighborhood directories")
    run.add_argument("--config", help="JSON config file; flags override its values")
    run.add_argument("--data-dir")
    run.add_argument("--output-dir")
    run.add_argument("--neighborhoods", type=_comma_list, default=None)
    run.add_argument("--length", type=int, default=None, help="messages per document")
    run.add_argument("--k-core", type=int, default=None)
    run.add_argument("--topics", type=int, default=None, help="LDA topic count")
    run.add_argument("--iterations", type=int, default=None, help="Gibbs sweeps")
    run.add_argument("--alpha", type=float, default=None)
    run.add_argument("--beta", type=float, default=None)
    run.add_argument("--combination", type=int, default=None, choices=(1, 2, 3))
    run.add_argument("--classifier", default=None, choices=("linear-svm", "gaussian-nb"))
    run.add_argument("--folds", type=int, default=None)
    run.add_argument("--tau", type=float, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--cap", type=int, default=None, help="messages kept per user")
    run.add_argument("--graph", default=None, choices=("directed", "undirected"))
    run.add_argument("--method", default=None, choices=("map-equation", "modularity"))
    run.add_argument("--restarts", type=int, default=None)
    run.add_argument("--stopwords", default=None)
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--resume", action="store_true", default=None)
    run.set_defaults(func=_cmd_run)

    ingest = commands.add_parser("ingest", help="timelines to topic documents")
    ingest.add_argument("--timelines", required=True)
    ingest.add_argument("--out-documents", required=True)
    ingest.add_argument("--length", type=int, default=20)
    ingest.add_argument("--cap", type=int, default=300)
    ingest.add_argument("--stopwords")
    ingest.set_defaults(func=_cmd_ingest)

    graph = commands.add_parser("graph", help="edge list to communities")
    graph.add_argument("--edges", required=True)
    graph.add_argument("--out-partition", required=True)
    graph.add_argument("--k-core", type=int, default=2)
    graph.add_argument("--graph", default="directed", choices=("directed", "undirected"))
    graph.add_argument("--method", default="map-equation", choices=("map-equation", "modularity"))
    graph.add_argument("--restarts", type=int, default=10)
    _add_seed(graph)
    graph.set_defaults(func=_cmd_graph)

    topics = commands.add_parser("topics", help="LDA over documents")
    topics.add_argument("--documents", required=True)
    topics.add_argument("--partition", required=True)
    topics.add_argument("--out-model", required=True)
    topics.add_argument("--out-doc-labels", required=True)
    topics.add_argument("--out-community-topics", required=True)
    topics.add_argument("--topics", type=int, default=500)
    topics.add_argument("--iterations", type=int, default=200)
    topics.add_argument("--alpha", type=float, default=None)
    topics.add_argument("--beta", type=float, default=0.01)
    _add_seed(topics)
    topics.set_defaults(func=_cmd_topics)

    groups = commands.add_parser("groups", help="four-gram near-duplicate groups")
    groups.add_argument("--timelines", required=True)
    groups.add_argument("--out-groups", required=True)
    groups.add_argument("--cap", type=int, default=300)
    groups.add_argument("--stopwords")
    groups.set_defaults(func=_cmd_groups)

    poi = commands.add_parser("poi", help="parties-of-interest probability table")
    poi.add_argument("--timelines", required=True)
    poi.add_argument("--groups", required=True)
    poi.add_argument("--partition", required=True)
    poi.add_argument("--community-topics", required=True)
    poi.add_argument("--neighborhood", required=True)
    poi.add_argument("--out-table", required=True)
    poi.add_argument("--out-observations", required=True)
    poi.add_argument("--cap", type=int, default=300)
    poi.set_defaults(func=_cmd_poi)

    trainer = commands.add_parser("train", help="cross-validate a classifier on a table")
    trainer.add_argument("--table", required=True)
    trainer.add_argument("--labels", required=True)
    trainer.add_argument("--neighborhood", default="n000")
    trainer.add_argument("--out-report")
    _add_classifier_args(trainer)
    _add_seed(trainer)
    trainer.set_defaults(func=_cmd_train)

    h1 = commands.add_parser("validate-h1", help="communities vs topics against null")
    h1.add_argument("--data-dir", required=True)
    h1.add_argument("--output-dir", required=True)
    h1.add_argument("--neighborhoods", type=_comma_list, default=None)
    h1.add_argument("--out-report", required=True)
    _add_seed(h1)
    h1.set_defaults(func=_cmd_validate_h1)

    early = commands.add_parser("simulate-early", help="partial-observation sweep")
    early.add_argument("--observations", required=True)
    early.add_argument("--community-topics", required=True)
    early.add_argument("--labels", required=True)
    early.add_argument("--neighborhood", default="n000")
    early.add_argument("--out-curve", required=True)
    early.add_argument("--reps", type=int, default=3)
    _add_classifier_args(early)
    _add_seed(early)
    early.set_defaults(func=_cmd_simulate_early)

    attack = commands.add_parser("simulate-attack", help="poisoning or evasion sweep")
    attack.add_argument("--kind", required=True, choices=("poisoning", "evasion"))
    attack.add_argument("--observations", required=True)
    attack.add_argument("--community-topics", required=True)
    attack.add_argument("--labels", required=True)
    attack.add_argument("--neighborhood", default="n000")
    attack.add_argument("--out-curve", required=True)
    attack.add_argument("--fraction", type=float, default=None)
    attack.add_argument("--fractions", type=_comma_floats, default=None)
    attack.add_argument("--reps", type=int, default=3)
    _add_classifier_args(attack)
    _add_seed(attack)
    attack.set_defaults(func=_cmd_simulate_attack)

    synth = commands.add_parser("synth", help="generate synthetic neighborhoods")
    synth.add_argument("--out-dir", required=True)
    synth.add_argument("--neighborhoods", type=int, default=1)
    synth.add_argument("--communities", type=int, default=None)
    synth.add_argument("--community-size", type=int, default=None)
    synth.add_argument("--p-in", type=float, default=None)
    synth.add_argument("--p-out", type=float, default=None)
    synth.add_argument("--topics", type=int, default=None)
    synth.add_argument("--vocab", type=int, default=None)
    synth.add_argument("--docs-per-user", type=int, default=None)
    synth.add_argument("--benign-groups", type=int, default=None)
    synth.add_argument("--spam-groups", type=int, default=None)
    synth.add_argument("--min-group-size", type=int, default=None)
    synth.add_argument("--max-group-size", type=int, default=None)
    _add_seed(synth)
    synth.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        level = logging.WARNING
        if args.verbose == 1:
            level = logging.INFO
        elif args.verbose >= 2:
            level = logging.DEBUG
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except SpamflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
