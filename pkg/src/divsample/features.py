"""Feature matrices, pairwise distances and PCA.

A feature matrix is a plain 2-D float ``numpy.ndarray`` with one row per
candidate and one column per feature dimension. :func:`as_feature_matrix`
enforces the invariants (finite, at least one row and one column) and is the
single entry point used by every other module.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DataError, DegenerateDataError, UsageError

METRICS = ("euclidean", "squared_euclidean")


def as_feature_matrix(x) -> np.ndarray:
    """Validate ``x`` and return it as a C-contiguous float64 matrix.

    A 1-D input is treated as ``n`` samples of dimension one.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DataError(f"feature matrix must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError(f"feature matrix must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise DataError(f"non-finite value at row {bad[0] + 1}, column {bad[1] + 1}")
    return np.ascontiguousarray(arr)


def load_features(path, has_header: bool = False) -> np.ndarray:
    """Read a comma-separated feature file into a matrix.

    Rows are samples and columns are dimensions. Errors name the offending
    line (1-based, counting the header if present) and column.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"feature file not found: {path}")
    rows: list[list[float]] = []
    width = None
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if has_header and lineno == 1:
                continue
            if not fields or (len(fields) == 1 and not fields[0].strip()):
                raise DataError(f"empty row {lineno}")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise DataError(
                    f"ragged row {lineno}: expected {width} fields, got {len(fields)}"
                )
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                for col, f in enumerate(fields, start=1):
                    try:
                        float(f)
                    except ValueError:
                        raise DataError(
                            f"non-numeric field {f!r} at row {lineno}, column {col}"
                        ) from None
    if not rows:
        raise DataError(f"no data rows in {path}")
    return as_feature_matrix(rows)


def save_features(path, x: np.ndarray) -> None:
    """Write ``x`` as CSV using the shortest round-tripping float repr."""
    x = as_feature_matrix(x)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        for row in x:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray
    metric: str

    def __len__(self) -> int:
        return self.values.shape[0]


def pairwise_distance(x, metric: str = "euclidean") -> DistanceMatrix:
    """All-pairs distances between the rows of ``x``.

    Each entry is computed from the coordinate differences directly (no Gram
    expansion), so the euclidean result satisfies the triangle inequality to
    rounding error.
    """
    if metric not in METRICS:
        raise UsageError(f"unknown metric {metric!r}; expected one of {METRICS}")
    x = as_feature_matrix(x)
    if x.shape[0] == 1:
        return DistanceMatrix(np.zeros((1, 1)), metric)
    scipy_metric = "euclidean" if metric == "euclidean" else "sqeuclidean"
    values = squareform(pdist(x, metric=scipy_metric))
    return DistanceMatrix(values, metric)


def distances_to(x: np.ndarray, point: np.ndarray) -> np.ndarray:
    """Euclidean distance from every row of ``x`` to ``point``."""
    return np.sqrt(np.sum((x - point) ** 2, axis=1))


@dataclass(frozen=True)
class PcaModel:
    """Principal axes of a data set.

    ``components`` holds one unit-norm principal direction per row, sorted by
    decreasing ``explained_variance`` (sample covariance eigenvalues with the
    ``1/(n - 1)`` normalisation).
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def pca_fit(x, target_dim: int) -> PcaModel:
    x = as_feature_matrix(x)
    n, d = x.shape
    if n < 2:
        raise UsageError("PCA needs at least two samples")
    if not 1 <= target_dim <= min(n - 1, d):
        raise UsageError(
            f"target_dim must lie in [1, {min(n - 1, d)}], got {target_dim}"
        )
    mean = x.mean(axis=0)
    centered = x - mean
    if not np.any(centered):
        raise DegenerateDataError("all rows are identical; PCA is undefined")
    # SVD of the centered data avoids squaring the condition number
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    variance = s**2 / (n - 1)
    return PcaModel(
        mean=mean,
        components=vt[:target_dim].copy(),
        explained_variance=variance[:target_dim].copy(),
    )


def pca_project(model: PcaModel, x) -> np.ndarray:
    x = as_feature_matrix(x)
    if x.shape[1] != model.mean.shape[0]:
        raise DataError(
            f"dimension mismatch: model expects {model.mean.shape[0]}, got {x.shape[1]}"
        )
    return (x - model.mean) @ model.components.T
