import numpy as np
import pytest
from hypothesis import settings

from cbir import EmbeddingStore, ItemMeta, SynthSpec, generate

# property tests here do real numpy/file work; wall-clock deadlines only add noise
settings.register_profile("cbir", deadline=None)
settings.load_profile("cbir")


def make_store(embeddings, categories, probabilities=None):
    """Store from raw arrays; ids dense, paths synthetic."""
    embeddings = np.asarray(embeddings, dtype=np.float32)
    meta = [
        ItemMeta(id=i, path=f"mem://{i}", category=categories[i])
        for i in range(embeddings.shape[0])
    ]
    return EmbeddingStore(meta=meta, embeddings=embeddings, probabilities=probabilities)


def random_probs(rng, n, num_classes):
    """Random valid probability rows (uniform Dirichlet-ish)."""
    raw = rng.uniform(0.01, 1.0, size=(n, num_classes))
    return (raw / raw.sum(axis=1, keepdims=True)).astype(np.float32)


@pytest.fixture(scope="session")
def clustered_store():
    """4 well-separated categories x 25 items; exact precision 1.0 at scope <= 25."""
    spec = SynthSpec(
        num_categories=4,
        items_per_category=25,
        dim=32,
        num_classes=40,
        intra_sigma=0.5,
        inter_separation=40.0,
        classes_per_category=5,
        seed=11,
    )
    return generate(spec)


@pytest.fixture(scope="session")
def clustered_spec_kwargs():
    """CLI-friendly flags matching `clustered_store`."""
    return {
        "categories": 4,
        "per-category": 25,
        "dim": 32,
        "classes": 40,
        "intra-sigma": 0.5,
        "inter-separation": 40.0,
        "classes-per-category": 5,
        "seed": 11,
    }
