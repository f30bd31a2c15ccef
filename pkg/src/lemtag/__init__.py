"""Trainable morphological analysis: edit-tree lemmatization and CRF tagging.

The package provides a log-linear lemmatizer over edit-tree candidate sets,
a pruned higher-order CRF tagger, a joint tree-CRF predicting tags and
lemmata together, two baselines, corpus I/O and an evaluation harness.  All
models follow the scikit-learn estimator convention (constructor parameters,
fit/predict, get_params).
"""

from .baselines import MostFrequentLemmatizer, TransducerLemmatizer
from .candidates import (
    CandidateSet,
    SeenLemmaTable,
    TreeInventory,
    build_inventory,
    coverage_stats,
    generate_candidates,
)
from .corpus import (
    ColumnMap,
    EvalReport,
    Sentence,
    Token,
    evaluate,
    generate_synthetic_corpus,
    read_corpus,
    write_corpus,
)
from .edit_tree import (
    EditTree,
    LcsNode,
    SubNode,
    alignment,
    apply_tree,
    extract_tree,
    longest_common_substring,
    parse_tree,
    render_tree,
)
from .features import FeatureConfig, FeatureDictionary, Lexicon, MorphTag
from .joint import FactorGraph, JointTaggerLemmatizer, bp_infer, build_factor_graph
from .lemmatizer import TreeLemmatizer
from .model_io import load_model, save_model
from .pipeline import MorphPipeline
from .tagger import CrfTagger

__version__ = "0.1.0"

__all__ = [
    "MostFrequentLemmatizer",
    "TransducerLemmatizer",
    "CandidateSet",
    "SeenLemmaTable",
    "TreeInventory",
    "build_inventory",
    "coverage_stats",
    "generate_candidates",
    "ColumnMap",
    "EvalReport",
    "Sentence",
    "Token",
    "evaluate",
    "generate_synthetic_corpus",
    "read_corpus",
    "write_corpus",
    "EditTree",
    "LcsNode",
    "SubNode",
    "alignment",
    "apply_tree",
    "extract_tree",
    "longest_common_substring",
    "parse_tree",
    "render_tree",
    "FeatureConfig",
    "FeatureDictionary",
    "Lexicon",
    "MorphTag",
    "FactorGraph",
    "JointTaggerLemmatizer",
    "bp_infer",
    "build_factor_graph",
    "TreeLemmatizer",
    "load_model",
    "save_model",
    "MorphPipeline",
    "CrfTagger",
    "__version__",
]
