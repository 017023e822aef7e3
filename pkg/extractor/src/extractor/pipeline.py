"""Batch feature extraction from an image directory tree.

The immediate subdirectories of the image root are the category labels
(the usual distribution layout of retrieval benchmarks). Images are
processed in sorted (category, filename) order so item ids are stable
across runs, resized with each architecture's canonical pipeline, and fed
through the network in fixed batches with a deterministic inference mode.

The output is a version-1 embedding store directory:

* ``embeddings.bin`` -- magic CBE1, u32 count, u32 dim, float32 rows
  (penultimate-layer activations).
* ``probs.bin`` -- magic CBP1, u32 count, u32 num_classes, float32 rows
  (the 1000-class softmax output).
* ``manifest.json`` -- counts plus {id, path, category} per item.

Unreadable images are skipped with a warning and recorded in
``skipped.json`` next to the store files.
"""

from __future__ import annotations

import json
import struct
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .architectures import get_arch, load_model

IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png", ".bmp", ".gif", ".tiff", ".webp"}
_HEADER = struct.Struct("<4sII")


@dataclass(frozen=True)
class ExtractorConfig:
    architecture: str = "inceptionresnetv2"
    image_root: str = "."
    batch_size: int = 32
    output: str = "store"
    weights: str | None = "imagenet"  # None: random init (offline smoke runs)


def list_images(image_root: Path) -> list[tuple[str, Path]]:
    """(category, path) pairs sorted by (category, filename)."""
    entries = []
    for category_dir in sorted(p for p in image_root.iterdir() if p.is_dir()):
        for path in sorted(category_dir.iterdir()):
            if path.is_file() and path.suffix.lower() in IMAGE_EXTENSIONS:
                entries.append((category_dir.name, path))
    return entries


def extract(config: ExtractorConfig) -> Path:
    """Run the network over every image and write the store directory."""
    from tensorflow import keras  # deferred import, see architectures.py

    arch = get_arch(config.architecture)
    if config.batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    image_root = Path(config.image_root)
    if not image_root.is_dir():
        raise FileNotFoundError(f"image root {image_root} is not a directory")
    entries = list_images(image_root)
    if not entries:
        raise ValueError(f"no images found under {image_root} (need category subdirectories)")

    model, preprocess = load_model(arch, weights=config.weights)
    size = arch.input_size

    kept: list[tuple[str, Path]] = []
    skipped: list[str] = []
    features: list[np.ndarray] = []
    probabilities: list[np.ndarray] = []
    batch: list[np.ndarray] = []
    inference_seconds = 0.0

    def flush():
        nonlocal inference_seconds
        if not batch:
            return
        x = preprocess(np.stack(batch).astype(np.float32))
        started = time.perf_counter()
        feats, probs = model(x, training=False)
        inference_seconds += time.perf_counter() - started
        features.append(np.asarray(feats, np.float32))
        probabilities.append(np.asarray(probs, np.float32))
        batch.clear()

    for category, path in entries:
        try:
            image = keras.utils.load_img(path, target_size=(size, size))
            array = keras.utils.img_to_array(image)
        except Exception as exc:  # unreadable/corrupt file: skip, keep going
            print(f"warning: skipping {path}: {exc}", file=sys.stderr)
            skipped.append(str(path))
            continue
        kept.append((category, path))
        batch.append(array)
        if len(batch) == config.batch_size:
            flush()
    flush()

    if not kept:
        raise ValueError("every image failed to load")

    all_features = np.concatenate(features)
    all_probs = np.concatenate(probabilities)
    out = Path(config.output)
    _write_store(out, kept, all_features, all_probs)
    if skipped:
        with open(out / "skipped.json", "w", encoding="utf-8") as fh:
            json.dump({"skipped": skipped}, fh, indent=2)
            fh.write("\n")

    per_image_ms = 1e3 * inference_seconds / len(kept)
    print(
        f"extracted {len(kept)} images ({len(skipped)} skipped) with "
        f"{arch.name}: dim {all_features.shape[1]}, "
        f"{all_probs.shape[1]} classes, {per_image_ms:.1f} ms/image inference",
        file=sys.stderr,
    )
    return out


def _write_store(directory: Path, kept, features: np.ndarray, probs: np.ndarray) -> None:
    if not np.isfinite(features).all():
        raise ValueError("network produced non-finite feature values")
    directory.mkdir(parents=True, exist_ok=True)
    _write_matrix(directory / "embeddings.bin", b"CBE1", features)
    _write_matrix(directory / "probs.bin", b"CBP1", probs)
    manifest = {
        "version": 1,
        "count": features.shape[0],
        "dim": int(features.shape[1]),
        "num_classes": int(probs.shape[1]),
        "items": [
            {"id": i, "path": str(path), "category": category}
            for i, (category, path) in enumerate(kept)
        ],
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def _write_matrix(path: Path, magic: bytes, data: np.ndarray) -> None:
    rows, cols = data.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, rows, cols))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())
