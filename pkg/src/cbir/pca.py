"""Principal component analysis over an embedding matrix.

Fitting runs an SVD of the mean-centered data rather than an explicit
covariance eigendecomposition; for D around 1500 and N up to ~10^4 the SVD
is the numerically stable route. Components are orthonormal rows ordered by
decreasing explained variance, with a deterministic sign convention: the
entry of largest magnitude in each component is non-negative. No whitening
is applied; projection must preserve distances on the retained subspace.

Models persist to ``pca.bin``: magic ``CBQ1``, u32 input_dim, u32
output_dim, then mean (D float32), components (M x D float32 row-major) and
explained_variance (M float32), all little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import Metric

PCA_MAGIC = b"CBQ1"
_PCA_HEADER = struct.Struct("<4sII")


@dataclass(frozen=True)
class PcaModel:
    """Fitted projection from input_dim features to output_dim components."""

    mean: np.ndarray                # (D,) float64
    components: np.ndarray          # (M, D) float64, orthonormal rows
    explained_variance: np.ndarray  # (M,) float64, non-increasing

    @property
    def input_dim(self) -> int:
        return self.components.shape[1]

    @property
    def output_dim(self) -> int:
        return self.components.shape[0]


def fit_pca(data: np.ndarray, num_components: int) -> PcaModel:
    """Fit PCA on the rows of `data`, keeping the top `num_components` axes.

    The mean is the per-dimension sample average and explained_variance[j]
    is the sample variance (N-1 denominator) of the data projected on
    component j. Raises on out-of-range component counts and on degenerate
    data with zero total variance.
    """
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError(f"data must be 2-D, got shape {data.shape}")
    n, dim = data.shape
    if n < 2:
        raise ValueError(f"need at least 2 rows to fit PCA, got {n}")
    max_m = min(n, dim)
    if not 1 <= num_components <= max_m:
        raise ValueError(
            f"num_components must be in [1, {max_m}] for {n}x{dim} data, got {num_components}"
        )

    x = data.astype(np.float64, copy=False)
    mean = x.mean(axis=0)
    centered = x - mean
    total_variance = float(np.square(centered).sum() / (n - 1))
    if total_variance == 0.0:
        raise ValueError("degenerate data: zero total variance (all rows identical)")

    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:num_components].copy()
    explained = singular[:num_components] ** 2 / (n - 1)

    # Resolve the SVD sign ambiguity: largest-|entry| coordinate made positive.
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            np.negative(row, out=row)

    return PcaModel(mean=mean, components=components, explained_variance=explained)


def transform(model: PcaModel, data: np.ndarray) -> np.ndarray:
    """Project rows of `data` onto the model's components.

    Returns an (N, M) float32 matrix with row i = components @ (row_i - mean).
    """
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError(f"data must be 2-D, got shape {data.shape}")
    if data.shape[1] != model.input_dim:
        raise ValueError(
            f"dimension mismatch: data has dim {data.shape[1]}, model expects {model.input_dim}"
        )
    projected = (data.astype(np.float64, copy=False) - model.mean) @ model.components.T
    return np.ascontiguousarray(projected, dtype=np.float32)


def transform_vector(model: PcaModel, vector: np.ndarray) -> np.ndarray:
    """Project a single D-vector; convenience for query-side handling."""
    vector = np.asarray(vector)
    if vector.ndim != 1:
        raise ValueError(f"vector must be 1-D, got shape {vector.shape}")
    return transform(model, vector[np.newaxis, :])[0]


def inverse_transform(model: PcaModel, projected: np.ndarray) -> np.ndarray:
    """Map projected rows back to the input space (float64)."""
    projected = np.asarray(projected, dtype=np.float64)
    if projected.ndim != 2 or projected.shape[1] != model.output_dim:
        raise ValueError(
            f"projected data must be 2-D with dim {model.output_dim}, got shape {projected.shape}"
        )
    return projected @ model.components + model.mean


def select_components(
    data: np.ndarray,
    store,
    scope: int,
    metric: Metric,
    candidates: list[int],
) -> tuple[int, list[tuple[int, float]]]:
    """Pick the component count with the best overall average precision.

    For each candidate M this fits PCA on `data`, projects the store and runs
    the exact-mode evaluation at the given scope and metric. Returns the
    winning M (ties break toward the smaller M, which is cheaper to query)
    and the full (M, precision) table in candidate order.
    """
    from .evaluation import EvalConfig, evaluate  # local import to avoid a cycle

    if not candidates:
        raise ValueError("candidates must be non-empty")
    table: list[tuple[int, float]] = []
    for m in candidates:
        model = fit_pca(data, m)
        config = EvalConfig(scope=scope, metric=metric, mode="exact", use_pca=True)
        report = evaluate(store, config, pca=model)
        table.append((m, report.overall))
    best_precision = max(precision for _, precision in table)
    best_m = min(m for m, precision in table if precision == best_precision)
    return best_m, table


def save_pca(model: PcaModel, path) -> None:
    """Write the model to `path` in the little-endian float32 pca.bin format."""
    with open(path, "wb") as fh:
        fh.write(_PCA_HEADER.pack(PCA_MAGIC, model.input_dim, model.output_dim))
        fh.write(np.ascontiguousarray(model.mean, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(model.components, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(model.explained_variance, dtype="<f4").tobytes())


def load_pca(path) -> PcaModel:
    """Read a pca.bin model; arrays come back float64 (values float32-exact)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing file: {path}")
    raw = path.read_bytes()
    if len(raw) < _PCA_HEADER.size:
        raise ValueError(f"{path.name}: shorter than the {_PCA_HEADER.size}-byte header")
    magic, input_dim, output_dim = _PCA_HEADER.unpack_from(raw)
    if magic != PCA_MAGIC:
        raise ValueError(f"{path.name}: bad magic {magic!r}, expected {PCA_MAGIC!r}")
    expected = _PCA_HEADER.size + 4 * (input_dim + output_dim * input_dim + output_dim)
    if len(raw) != expected:
        raise ValueError(
            f"{path.name}: header declares dims {input_dim}->{output_dim} "
            f"({expected} bytes) but file is {len(raw)} bytes"
        )
    floats = np.frombuffer(raw, dtype="<f4", offset=_PCA_HEADER.size).astype(np.float64)
    mean = floats[:input_dim]
    components = floats[input_dim : input_dim + output_dim * input_dim].reshape(
        output_dim, input_dim
    )
    explained = floats[input_dim + output_dim * input_dim :]
    return PcaModel(mean=mean, components=components, explained_variance=explained)
