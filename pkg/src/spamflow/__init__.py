"""spamflow: spam campaign detection from community structure and topics.

The pipeline groups near-duplicate messages, detects graph communities,
models topics, derives per-group propagation probability tables and
classifies groups as spam or benign, with simulation harnesses for early
detection and adversarial robustness.
"""

from .classify import (
    COMBINATIONS,
    GaussianNaiveBayes,
    LabeledDataset,
    LinearSVM,
    apply_combination,
    balance_with_smote,
    cross_validate,
    label_accounts,
    smote,
    train,
)
from .communities import (
    detect_communities,
    map_equation_codelength,
    modularity,
    visit_rates,
)
from .errors import ConfigError, DataError, SpamflowError
from .evalmetrics import (
    compare_to_null,
    contingency,
    homogeneity_completeness_v,
    z_test,
)
from .graph import Partition, SocialGraph, build_graphs, k_core, null_partition
from .grouping import MessageGroup, four_grams, group_similar
from .ingest import (
    Document,
    Message,
    Timeline,
    build_documents,
    clean_and_tokenize,
    parse_timelines,
)
from .pipeline import PipelineConfig, run_pipeline, validate_h1
from .poi import ProbTable, assemble_features, build_prob_table, poi_counts
from .simulate import run_early_detection, run_evasion, run_poisoning, sweep_attack
from .synth import SynthConfig, generate_dataset, generate_neighborhood
from .topics import GibbsLDA, community_topics, label_documents
from .validation import derive_seed

__version__ = "0.1.0"

__all__ = [
    "COMBINATIONS",
    "ConfigError",
    "DataError",
    "Document",
    "GaussianNaiveBayes",
    "GibbsLDA",
    "LabeledDataset",
    "LinearSVM",
    "Message",
    "MessageGroup",
    "Partition",
    "PipelineConfig",
    "ProbTable",
    "SocialGraph",
    "SpamflowError",
    "SynthConfig",
    "Timeline",
    "apply_combination",
    "assemble_features",
    "balance_with_smote",
    "build_documents",
    "build_graphs",
    "build_prob_table",
    "clean_and_tokenize",
    "community_topics",
    "compare_to_null",
    "contingency",
    "cross_validate",
    "derive_seed",
    "detect_communities",
    "four_grams",
    "generate_dataset",
    "generate_neighborhood",
    "group_similar",
    "homogeneity_completeness_v",
    "k_core",
    "label_accounts",
    "label_documents",
    "map_equation_codelength",
    "modularity",
    "null_partition",
    "parse_timelines",
    "poi_counts",
    "run_early_detection",
    "run_evasion",
    "run_pipeline",
    "run_poisoning",
    "smote",
    "sweep_attack",
    "train",
    "validate_h1",
    "visit_rates",
    "z_test",
]
