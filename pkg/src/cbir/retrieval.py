"""Exact, sampled and class-routed top-k retrieval over an embedding store.

The exact index is a linear scan of a feature bank (raw embeddings or PCA
projections). The class-routed index additionally assigns every item to its
top-k predicted classes (k=5 by default) and keeps an inverted list per
class; a routed query scans only the union of the lists for the query's own
top-k classes, which on clustered data is a small fraction of the database.

All tie-breaking is by ascending item id, everywhere, so results are
deterministic and reproducible. Indexes are immutable after build and safe
for concurrent queries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import Metric, row_distances
from .store import EmbeddingStore


@dataclass(frozen=True)
class RankedResult:
    """Top-scope retrieval outcome: ids ordered by ascending distance.

    `candidate_count` is the number of items actually scanned (N for an
    exact query, the candidate-union size for a routed one).
    """

    ids: np.ndarray        # int64, ordered by (distance, id)
    distances: np.ndarray  # float64, non-decreasing
    candidate_count: int

    def __len__(self) -> int:
        return self.ids.shape[0]

    def entries(self) -> list[tuple[int, float]]:
        """(item_id, distance) pairs in rank order."""
        return [(int(i), float(d)) for i, d in zip(self.ids, self.distances)]


@dataclass(frozen=True)
class ExactIndex:
    """Linear-scan index over a feature bank aligned with a store."""

    store: EmbeddingStore
    metric: Metric
    features: np.ndarray  # (N, Df) float32, row i = features of item i
    space: str = "raw"    # "raw" or "pca"

    @property
    def count(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ClassRoutedIndex:
    """Exact index plus a per-class inverted file over top-k class assignments."""

    base: ExactIndex
    top_classes_per_item: np.ndarray     # (N, k) int64, descending probability
    inverted: dict[int, np.ndarray]      # class id -> sorted item ids
    k: int

    @property
    def num_classes(self) -> int:
        return self.base.store.probabilities.shape[1]


def build_exact(
    store: EmbeddingStore,
    metric: Metric,
    features: np.ndarray | None = None,
    space: str = "raw",
) -> ExactIndex:
    """Build a linear-scan index; `features` defaults to the store embeddings.

    Passing a PCA-projected matrix (with space="pca") is the supported way to
    query in reduced dimension; the index itself is feature-space-agnostic.
    """
    if features is None:
        features = store.embeddings
    features = np.ascontiguousarray(features, dtype=np.float32)
    if features.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {features.shape}")
    if features.shape[0] != store.count:
        raise ValueError(
            f"feature count {features.shape[0]} does not match store count {store.count}"
        )
    return ExactIndex(store=store, metric=metric, features=features, space=space)


def _rank(candidate_ids: np.ndarray, dists: np.ndarray, scope: int) -> tuple[np.ndarray, np.ndarray]:
    # candidate_ids must be ascending; the stable sort then breaks distance
    # ties by ascending id.
    order = np.argsort(dists, kind="stable")[:scope]
    return candidate_ids[order], dists[order]


def query_exact(
    index: ExactIndex,
    query: np.ndarray,
    scope: int,
    exclude_id: int | None = None,
) -> RankedResult:
    """Scan every item and return the `scope` nearest, ties by ascending id.

    `exclude_id` drops one database item from the scan (for leave-one-out
    protocols); by default the query item, when it is a database row, is a
    legitimate result.
    """
    if scope < 1:
        raise ValueError(f"scope must be >= 1, got {scope}")
    dists = row_distances(index.features, query, index.metric)
    ids = np.arange(index.count, dtype=np.int64)
    if exclude_id is not None:
        keep = ids != exclude_id
        ids, dists = ids[keep], dists[keep]
    top_ids, top_dists = _rank(ids, dists, scope)
    return RankedResult(ids=top_ids, distances=top_dists, candidate_count=int(ids.shape[0]))


def top_k_classes(prob_row: np.ndarray, k: int) -> list[int]:
    """Class ids with the k largest probabilities, ties by ascending class id."""
    prob_row = np.asarray(prob_row)
    if prob_row.ndim != 1:
        raise ValueError(f"probability row must be 1-D, got shape {prob_row.shape}")
    if not 1 <= k <= prob_row.shape[0]:
        raise ValueError(f"k must be in [1, {prob_row.shape[0]}], got {k}")
    order = np.argsort(-prob_row, kind="stable")[:k]
    return [int(c) for c in order]


def build_class_routed(
    store: EmbeddingStore,
    metric: Metric,
    features: np.ndarray | None = None,
    k: int = 5,
    space: str = "raw",
) -> ClassRoutedIndex:
    """Assign every item to its top-k classes and build the inverted file.

    Requires the store to carry class probabilities. The build is
    deterministic: assignments use the same descending-probability,
    ascending-id order as `top_k_classes`.
    """
    if store.probabilities is None:
        raise ValueError("class-routed index requires a store with probabilities")
    probs = store.probabilities
    if not 1 <= k <= probs.shape[1]:
        raise ValueError(f"k must be in [1, {probs.shape[1]}], got {k}")
    base = build_exact(store, metric, features, space)

    top = np.argsort(-probs, axis=1, kind="stable")[:, :k].astype(np.int64)

    inverted: dict[int, np.ndarray] = {}
    items = np.repeat(np.arange(store.count, dtype=np.int64), k)
    classes = top.ravel()
    order = np.lexsort((items, classes))
    items, classes = items[order], classes[order]
    boundaries = np.flatnonzero(np.diff(classes)) + 1
    for class_id, members in zip(
        classes[np.concatenate(([0], boundaries))] if classes.size else [],
        np.split(items, boundaries),
    ):
        inverted[int(class_id)] = members

    return ClassRoutedIndex(base=base, top_classes_per_item=top, inverted=inverted, k=k)


def query_routed(
    index: ClassRoutedIndex,
    query: np.ndarray,
    query_probs: np.ndarray,
    scope: int,
    exclude_id: int | None = None,
) -> RankedResult:
    """Scan only items sharing a top-k class with the query.

    The candidate set is the union of the inverted lists for the query's
    top-k classes. If it holds fewer than `scope` items the routing widens
    to the query's next-most-probable classes, and once classes are
    exhausted falls back to a full scan, so a routed query never returns
    fewer results than an exact one would.
    """
    if scope < 1:
        raise ValueError(f"scope must be >= 1, got {scope}")
    query_probs = np.asarray(query_probs)
    if query_probs.ndim != 1 or query_probs.shape[0] != index.num_classes:
        raise ValueError(
            f"query probabilities must have dim {index.num_classes}, "
            f"got shape {query_probs.shape}"
        )
    base = index.base

    ranked_classes = np.argsort(-query_probs, kind="stable")
    lists = [index.inverted.get(int(c)) for c in ranked_classes[: index.k]]
    lists = [l for l in lists if l is not None]
    candidates = _union(lists, exclude_id)

    next_class = index.k
    while candidates.shape[0] < scope and next_class < ranked_classes.shape[0]:
        extra = index.inverted.get(int(ranked_classes[next_class]))
        if extra is not None:
            lists.append(extra)
            candidates = _union(lists, exclude_id)
        next_class += 1
    if candidates.shape[0] < scope:
        # Classes exhausted and still short: full scan.
        candidates = np.arange(base.count, dtype=np.int64)
        if exclude_id is not None:
            candidates = candidates[candidates != exclude_id]

    dists = row_distances(base.features[candidates], query, base.metric)
    top_ids, top_dists = _rank(candidates, dists, scope)
    return RankedResult(
        ids=top_ids, distances=top_dists, candidate_count=int(candidates.shape[0])
    )


def query_sampled(
    index: ExactIndex,
    query: np.ndarray,
    scope: int,
    sample_size: int,
    seed: int,
    exclude_id: int | None = None,
) -> RankedResult:
    """Scan a seeded uniform sample of min(sample_size, N) items.

    Deterministic given the seed; with sample_size >= N this degenerates to
    an exact query.
    """
    if scope < 1:
        raise ValueError(f"scope must be >= 1, got {scope}")
    if sample_size < scope:
        raise ValueError(f"sample_size ({sample_size}) must be >= scope ({scope})")
    rng = np.random.default_rng(seed)
    size = min(sample_size, index.count)
    sample = np.sort(rng.choice(index.count, size=size, replace=False)).astype(np.int64)
    if exclude_id is not None:
        sample = sample[sample != exclude_id]
    dists = row_distances(index.features[sample], query, index.metric)
    top_ids, top_dists = _rank(sample, dists, scope)
    return RankedResult(ids=top_ids, distances=top_dists, candidate_count=int(sample.shape[0]))


def mean_candidate_size(index: ClassRoutedIndex) -> float:
    """Average routed candidate-set size over all database items as queries.

    Each item's candidate set is the union of the inverted lists for its own
    top-k classes (the item itself included); no widening is applied.
    """
    n = index.base.count
    if n == 0:
        return 0.0
    total = 0
    for row in index.top_classes_per_item:
        lists = [index.inverted[int(c)] for c in row if int(c) in index.inverted]
        total += _union(lists, None).shape[0]
    return total / n


def _union(lists: list[np.ndarray], exclude_id: int | None) -> np.ndarray:
    if not lists:
        merged = np.empty(0, dtype=np.int64)
    elif len(lists) == 1:
        merged = lists[0]
    else:
        merged = np.unique(np.concatenate(lists))
    if exclude_id is not None:
        merged = merged[merged != exclude_id]
    return merged
