"""Synthetic stores with planted category clusters and class structure.

Purpose: exercise the full retrieval/evaluation stack without datasets or a
feature extractor. Category centers sit on scaled coordinate axes (center g
is inter_separation * e_g), which guarantees pairwise center distances
analytically instead of via rejection sampling. Items are center plus
isotropic Gaussian noise; each category owns `classes_per_category` "home"
classes and item probability rows concentrate their mass there, so the
class-routed index recovers the planted clusters.

With inter_separation >= 10 * intra_sigma * sqrt(dim) and
items_per_category >= scope, exact evaluation is guaranteed to reach
precision 1.0 (the defaults satisfy this for scope 20).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .store import EmbeddingStore, ItemMeta


@dataclass(frozen=True)
class SynthSpec:
    """Shape and noise parameters of a generated store.

    Defaults mimic a 10-category, 200-per-category database with
    InceptionResNetV2-sized features and 1000 softmax classes.
    """

    num_categories: int = 10
    items_per_category: int = 200
    dim: int = 1536
    num_classes: int = 1000
    intra_sigma: float = 1.0
    inter_separation: float = 400.0
    classes_per_category: int = 5
    seed: int = 42

    def validate(self) -> None:
        if self.num_categories < 1:
            raise ValueError("num_categories must be >= 1")
        if self.items_per_category < 1:
            raise ValueError("items_per_category must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if not self.intra_sigma > 0:
            raise ValueError("intra_sigma must be > 0")
        if not self.inter_separation > 0:
            raise ValueError("inter_separation must be > 0")
        if not 1 <= self.classes_per_category <= self.num_classes:
            raise ValueError("classes_per_category must be in [1, num_classes]")
        if self.num_categories > self.dim:
            raise ValueError(
                f"cannot place {self.num_categories} axis-aligned centers in "
                f"{self.dim} dimensions; need dim >= num_categories"
            )


def generate(spec: SynthSpec) -> EmbeddingStore:
    """Generate a store from `spec`; bit-identical for identical seeds."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = spec.num_categories * spec.items_per_category

    features = rng.standard_normal((n, spec.dim)) * spec.intra_sigma
    category_of_item = np.repeat(np.arange(spec.num_categories), spec.items_per_category)
    for g in range(spec.num_categories):
        rows = slice(g * spec.items_per_category, (g + 1) * spec.items_per_category)
        features[rows, g] += spec.inter_separation
    features = features.astype(np.float32)

    # Home classes get weights ~150x the off-class noise floor, so every
    # item's top classes_per_category classes are exactly its home classes.
    probs = rng.uniform(0.0, 0.01, size=(n, spec.num_classes))
    home_weights = rng.uniform(1.0, 2.0, size=(n, spec.classes_per_category))
    for g in range(spec.num_categories):
        rows = slice(g * spec.items_per_category, (g + 1) * spec.items_per_category)
        home = _home_classes(g, spec)
        probs[rows, home] = home_weights[rows]
    probs /= probs.sum(axis=1, keepdims=True)
    probs = probs.astype(np.float32)

    meta = [
        ItemMeta(
            id=i,
            path=f"synth://cat{category_of_item[i]:02d}/{i:05d}",
            category=f"cat{category_of_item[i]:02d}",
        )
        for i in range(n)
    ]
    return EmbeddingStore(meta=meta, embeddings=features, probabilities=probs)


def _home_classes(category: int, spec: SynthSpec) -> np.ndarray:
    start = category * spec.classes_per_category
    return np.arange(start, start + spec.classes_per_category) % spec.num_classes
