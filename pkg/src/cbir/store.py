"""Persistent embedding store: float32 feature matrix, optional class
probabilities, and item metadata.

Directory layout (version 1, all integers and floats little-endian):

* ``embeddings.bin`` -- magic ``CBE1``, u32 count, u32 dim, then
  count x dim float32 row-major.
* ``probs.bin`` -- magic ``CBP1``, u32 count, u32 num_classes, then
  count x num_classes float32 row-major. Present only when the store
  carries class probabilities.
* ``manifest.json`` -- ``{"version": 1, "count": N, "dim": D,
  "num_classes": C|null, "items": [{"id", "path", "category"}, ...]}``
  with items sorted by id.

Floats are stored as 32-bit little-endian regardless of platform so that
distances and evaluation reports reproduce bit-exactly across machines.
Category labels are ground truth from the dataset layout; they are never
derived from classifier output. Stores are immutable after load and safe
for concurrent reads.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

STORE_VERSION = 1
EMBEDDINGS_MAGIC = b"CBE1"
PROBS_MAGIC = b"CBP1"

# |row sum - 1| tolerance for probability rows (float32 softmax output).
PROB_ROW_SUM_TOL = 1e-3

_HEADER = struct.Struct("<4sII")


class StoreFormatError(Exception):
    """A store directory or binary payload does not match the declared format."""


class StoreValidationError(Exception):
    """A store violates one or more content invariants."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class ItemMeta:
    """Metadata for one stored item; `category` is the relevance ground truth."""

    id: int
    path: str
    category: str


@dataclass(eq=False)
class EmbeddingStore:
    """In-memory store: metadata plus N x D float32 embeddings and optional
    N x C float32 class probabilities."""

    meta: list[ItemMeta]
    embeddings: np.ndarray
    probabilities: np.ndarray | None = None
    _categories: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        emb = np.asarray(self.embeddings)
        if emb.ndim != 2:
            raise ValueError(f"embeddings must be 2-D, got shape {emb.shape}")
        self.embeddings = np.ascontiguousarray(emb, dtype=np.float32)
        if self.probabilities is not None:
            probs = np.asarray(self.probabilities)
            if probs.ndim != 2:
                raise ValueError(f"probabilities must be 2-D, got shape {probs.shape}")
            self.probabilities = np.ascontiguousarray(probs, dtype=np.float32)
        self._categories = np.array([m.category for m in self.meta], dtype=object)

    @property
    def count(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def num_classes(self) -> int | None:
        return None if self.probabilities is None else self.probabilities.shape[1]

    def category_of(self, item_id: int) -> str:
        """Ground-truth category of a stored item id."""
        if not 0 <= item_id < len(self.meta):
            raise KeyError(f"unknown item id {item_id}")
        return self.meta[item_id].category

    def category_labels(self) -> np.ndarray:
        """Categories indexed by item id (object array of str)."""
        return self._categories


def validate_store(store: EmbeddingStore) -> list[str]:
    """Check every store invariant; returns one message per violation.

    Reports rather than raises, so callers can surface the full list.
    Each message names the offending item id (or 'store' for global rules).
    """
    violations: list[str] = []
    emb = store.embeddings
    n = emb.shape[0]

    if emb.shape[1] <= 0:
        violations.append("store: embedding dim must be > 0")
    finite_rows = np.isfinite(emb).all(axis=1)
    for i in np.flatnonzero(~finite_rows):
        violations.append(f"item {i}: embedding contains NaN or Inf")

    if len(store.meta) != n:
        violations.append(
            f"store: manifest has {len(store.meta)} items but embeddings have {n} rows"
        )
    seen: set[int] = set()
    for pos, m in enumerate(store.meta):
        if m.id in seen:
            violations.append(f"item {m.id}: duplicate id in manifest")
        seen.add(m.id)
        if m.id != pos:
            violations.append(f"item {m.id}: ids must be dense 0..N-1 (position {pos})")
        if not m.category:
            violations.append(f"item {m.id}: category is empty")

    probs = store.probabilities
    if probs is not None:
        if probs.shape[0] != n:
            violations.append(
                f"store: probabilities have {probs.shape[0]} rows but embeddings have {n}"
            )
        in_range = ((probs >= 0.0) & (probs <= 1.0)).all(axis=1)
        for i in np.flatnonzero(~in_range):
            violations.append(f"item {i}: probability outside [0, 1]")
        sums = probs.sum(axis=1, dtype=np.float64)
        bad_sum = np.abs(sums - 1.0) > PROB_ROW_SUM_TOL
        for i in np.flatnonzero(bad_sum):
            violations.append(f"item {i}: probability row sums to {sums[i]:.6f}, not 1")

    return violations


def write_store(store: EmbeddingStore, directory) -> None:
    """Write `store` to `directory` in the version-1 layout.

    Refuses to write stores that fail validation; a read of the written
    directory reproduces every float bit-exactly and every manifest field.
    """
    violations = validate_store(store)
    if violations:
        raise StoreValidationError(violations)

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    _write_matrix(directory / "embeddings.bin", EMBEDDINGS_MAGIC, store.embeddings)
    if store.probabilities is not None:
        _write_matrix(directory / "probs.bin", PROBS_MAGIC, store.probabilities)

    manifest = {
        "version": STORE_VERSION,
        "count": store.count,
        "dim": store.dim,
        "num_classes": store.num_classes,
        "items": [
            {"id": m.id, "path": m.path, "category": m.category}
            for m in sorted(store.meta, key=lambda m: m.id)
        ],
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def read_store(directory) -> EmbeddingStore:
    """Load and validate a store directory written by `write_store`.

    Raises StoreFormatError for structural problems (missing file, bad magic,
    header/payload size disagreement) and StoreValidationError if the decoded
    store violates content invariants.
    """
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.is_file():
        raise StoreFormatError(f"missing file: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise StoreFormatError(f"manifest.json is not valid JSON: {exc}") from exc

    version = manifest.get("version")
    if version != STORE_VERSION:
        raise StoreFormatError(f"unsupported manifest version {version!r}, expected {STORE_VERSION}")
    try:
        count = manifest["count"]
        dim = manifest["dim"]
        num_classes = manifest["num_classes"]
        items = manifest["items"]
    except KeyError as exc:
        raise StoreFormatError(f"manifest.json missing field {exc}") from exc

    embeddings = _read_matrix(directory / "embeddings.bin", EMBEDDINGS_MAGIC)
    if embeddings.shape != (count, dim):
        raise StoreFormatError(
            f"embeddings.bin is {embeddings.shape[0]}x{embeddings.shape[1]} "
            f"but manifest declares {count}x{dim}"
        )

    probs_path = directory / "probs.bin"
    probabilities = None
    if num_classes is not None:
        if not probs_path.is_file():
            raise StoreFormatError(
                f"missing file: {probs_path} (manifest declares num_classes={num_classes})"
            )
        probabilities = _read_matrix(probs_path, PROBS_MAGIC)
        if probabilities.shape != (count, num_classes):
            raise StoreFormatError(
                f"probs.bin is {probabilities.shape[0]}x{probabilities.shape[1]} "
                f"but manifest declares {count}x{num_classes}"
            )
    elif probs_path.exists():
        raise StoreFormatError("probs.bin present but manifest declares num_classes null")

    try:
        meta = [ItemMeta(id=it["id"], path=it["path"], category=it["category"]) for it in items]
    except (KeyError, TypeError) as exc:
        raise StoreFormatError(f"manifest item missing field: {exc}") from exc

    store = EmbeddingStore(meta=meta, embeddings=embeddings, probabilities=probabilities)
    violations = validate_store(store)
    if violations:
        raise StoreValidationError(violations)
    return store


def _write_matrix(path: Path, magic: bytes, data: np.ndarray) -> None:
    rows, cols = data.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, rows, cols))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def _read_matrix(path: Path, magic: bytes) -> np.ndarray:
    if not path.is_file():
        raise StoreFormatError(f"missing file: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise StoreFormatError(f"{path.name}: shorter than the {_HEADER.size}-byte header")
    got_magic, rows, cols = _HEADER.unpack_from(raw)
    if got_magic != magic:
        raise StoreFormatError(f"{path.name}: bad magic {got_magic!r}, expected {magic!r}")
    expected = _HEADER.size + 4 * rows * cols
    if len(raw) != expected:
        raise StoreFormatError(
            f"{path.name}: header declares {rows}x{cols} float32 "
            f"({expected} bytes) but file is {len(raw)} bytes"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return data.reshape(rows, cols).copy()
