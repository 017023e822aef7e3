"""Content-based image retrieval over deep-feature embeddings.

Exact, sampled and class-routed top-k search with PCA dimensionality
reduction and precision@scope evaluation.
"""

from .evaluation import (
    Comparison,
    EvalConfig,
    EvalReport,
    benchmark_latency,
    compare_reports,
    evaluate,
    precision_at_scope,
)
from .metrics import Metric, l1_distance, l2sq_distance, row_distances
from .pca import PcaModel, fit_pca, inverse_transform, load_pca, save_pca, select_components, transform, transform_vector
from .retrieval import (
    ClassRoutedIndex,
    ExactIndex,
    RankedResult,
    build_class_routed,
    build_exact,
    mean_candidate_size,
    query_exact,
    query_routed,
    query_sampled,
    top_k_classes,
)
from .store import (
    EmbeddingStore,
    ItemMeta,
    StoreFormatError,
    StoreValidationError,
    read_store,
    validate_store,
    write_store,
)
from .synth import SynthSpec, generate

__all__ = [
    "ClassRoutedIndex",
    "Comparison",
    "EmbeddingStore",
    "EvalConfig",
    "EvalReport",
    "ExactIndex",
    "ItemMeta",
    "Metric",
    "PcaModel",
    "RankedResult",
    "StoreFormatError",
    "StoreValidationError",
    "SynthSpec",
    "benchmark_latency",
    "build_class_routed",
    "build_exact",
    "compare_reports",
    "evaluate",
    "fit_pca",
    "generate",
    "inverse_transform",
    "l1_distance",
    "l2sq_distance",
    "load_pca",
    "mean_candidate_size",
    "precision_at_scope",
    "query_exact",
    "query_routed",
    "query_sampled",
    "read_store",
    "row_distances",
    "save_pca",
    "select_components",
    "top_k_classes",
    "transform",
    "transform_vector",
    "validate_store",
    "write_store",
]
