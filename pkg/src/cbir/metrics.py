"""Distance functions between feature vectors.

L2SQ is squared Euclidean distance: no square root is taken, so it is not a
metric in the mathematical sense (the triangle inequality fails), but it
ranks neighbors identically to true Euclidean distance and saves a sqrt per
comparison. Both distances accumulate in float64 even for float32 inputs;
at feature dimensions around 1500 a float32 running sum loses digits that
can matter for ranking.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

# Rows per block in the vectorized scan; keeps the diff scratch cache-resident.
_SCAN_BLOCK = 1024


class Metric(Enum):
    """Dissimilarity measure between feature vectors."""

    L1 = "l1"
    L2SQ = "l2sq"

    @classmethod
    def from_string(cls, name: str) -> "Metric":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown metric {name!r}; expected 'l1' or 'l2sq'") from None


def row_distances(features: np.ndarray, query: np.ndarray, metric: Metric) -> np.ndarray:
    """Distance from `query` to every row of `features`.

    Returns a float64 array of length features.shape[0]. This is the single
    distance kernel in the package: the scalar functions below route through
    it, so a brute-force scan and a per-pair computation produce bit-identical
    values.
    """
    features = np.asarray(features)
    query = np.asarray(query)
    if features.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {features.shape}")
    if query.ndim != 1:
        raise ValueError(f"query must be 1-D, got shape {query.shape}")
    if features.shape[1] != query.shape[0]:
        raise ValueError(
            f"dimension mismatch: features have dim {features.shape[1]}, "
            f"query has dim {query.shape[0]}"
        )
    n, dim = features.shape
    out = np.empty(n, dtype=np.float64)
    if n == 0:
        return out
    scratch = np.empty((min(_SCAN_BLOCK, n), dim), dtype=np.result_type(features, query))
    for start in range(0, n, _SCAN_BLOCK):
        block = features[start : start + _SCAN_BLOCK]
        diff = scratch[: block.shape[0]]
        np.subtract(block, query, out=diff)
        if metric is Metric.L2SQ:
            out[start : start + block.shape[0]] = np.einsum(
                "ij,ij->i", diff, diff, dtype=np.float64
            )
        else:
            np.abs(diff, out=diff)
            out[start : start + block.shape[0]] = diff.sum(axis=1, dtype=np.float64)
    return out


def _pair_distance(a, b, metric: Metric) -> float:
    a = np.asarray(a)
    if a.ndim != 1:
        raise ValueError(f"vectors must be 1-D, got shape {a.shape}")
    return float(row_distances(a[np.newaxis, :], b, metric)[0])


def l1_distance(a, b) -> float:
    """Manhattan distance sum_i |a_i - b_i| between two equal-length vectors."""
    return _pair_distance(a, b, Metric.L1)


def l2sq_distance(a, b) -> float:
    """Squared Euclidean distance sum_i (a_i - b_i)^2 between two vectors."""
    return _pair_distance(a, b, Metric.L2SQ)
