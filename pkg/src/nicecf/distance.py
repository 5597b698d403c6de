"""Heterogeneous distance over mixed feature types, plus neighbor scans.

The per-feature distance is the overlap metric for categorical features
(0 when equal, 1 otherwise) and the training-range-normalized absolute
difference for numerical ones. A numerical feature whose training range is
zero degenerates to the overlap rule. Feature distances are combined as a
weighted L1 sum; weights express the relative cost of changing each feature
and default to 1.

Vectorized scans against a dataset accumulate per-feature terms in schema
order so their sums are bit-identical to the scalar path.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DistanceError, NoUnlikeNeighborError
from .tabular import Dataset, FeatureKind, FeatureStats, Instance


def check_weights(stats: Sequence[FeatureStats], weights: Sequence[float] | None) -> tuple[float, ...]:
    """Validate a weight vector (positive finite, one per feature); None means all ones."""
    if weights is None:
        return (1.0,) * len(stats)
    if len(weights) != len(stats):
        raise DistanceError(f"{len(weights)} weights for {len(stats)} features")
    for w in weights:
        if not (w > 0.0) or not np.isfinite(w):
            raise DistanceError(f"weights must be positive and finite, got {w}")
    return tuple(float(w) for w in weights)


def heom_feature(stat: FeatureStats, a: "str | float", b: "str | float") -> float:
    """Distance contribution of one feature, in [0, 1] for in-range values.

    Categorical: 0 if the labels match, else 1. Numerical: |a - b| divided by
    the training range; a zero range means 0 for equal values and 1 otherwise.
    """
    if stat.kind is FeatureKind.CATEGORICAL:
        return 0.0 if a == b else 1.0
    if stat.range == 0.0:
        return 0.0 if a == b else 1.0
    return abs(float(a) - float(b)) / stat.range


def heom(
    stats: Sequence[FeatureStats],
    a: Instance,
    b: Instance,
    weights: Sequence[float] | None = None,
) -> float:
    """Weighted L1 sum of per-feature distances between two instances."""
    if len(a) != len(stats) or len(b) != len(stats):
        raise DistanceError("instance length does not match statistics")
    w = check_weights(stats, weights)
    total = 0.0
    for stat, wj, aj, bj in zip(stats, w, a, b):
        total += wj * heom_feature(stat, aj, bj)
    return total


def heom_to_rows(
    stats: Sequence[FeatureStats],
    x: Instance,
    dataset: Dataset,
    weights: Sequence[float] | None = None,
) -> np.ndarray:
    """Distances from one instance to every row of a dataset.

    Accumulates one feature at a time in schema order; entry i is
    bit-identical to ``heom(stats, x, dataset.rows[i], weights)``.
    """
    if len(x) != len(stats):
        raise DistanceError("instance length does not match statistics")
    if tuple(s.name for s in stats) != tuple(s.name for s in dataset.schema):
        raise DistanceError("statistics do not match the dataset schema")
    w = check_weights(stats, weights)
    n = len(dataset)
    total = np.zeros(n, dtype=np.float64)
    cols = dataset.columns()
    for j, (stat, wj) in enumerate(zip(stats, w)):
        if stat.kind is FeatureKind.CATEGORICAL:
            codes, mapping = cols[j]
            code = mapping.get(x[j], -1)
            term = (codes != code).astype(np.float64)
        else:
            col = cols[j]
            if stat.range == 0.0:
                term = (col != float(x[j])).astype(np.float64)
            else:
                term = np.abs(float(x[j]) - col) / stat.range
        total += wj * term
    return total


def k_nearest(
    stats: Sequence[FeatureStats],
    x: Instance,
    dataset: Dataset,
    k: int,
    weights: Sequence[float] | None = None,
) -> list[int]:
    """Indices of the k nearest rows, closest first; distance ties break by row index."""
    if k < 1:
        raise DistanceError(f"k must be >= 1, got {k}")
    if k > len(dataset):
        raise DistanceError(f"k={k} exceeds dataset size {len(dataset)}")
    d = heom_to_rows(stats, x, dataset, weights)
    order = np.lexsort((np.arange(len(d)), d))
    return [int(i) for i in order[:k]]


def nearest_unlike_neighbor(
    stats: Sequence[FeatureStats],
    x: Instance,
    train: Dataset,
    train_predictions: Sequence[int],
    predicted_class: int,
    weights: Sequence[float] | None = None,
) -> int:
    """Index of the nearest correctly-predicted training row of the other class.

    Candidate rows must both be predicted differently from ``predicted_class``
    and carry a ground-truth label equal to their own prediction. Distance
    ties break toward the smaller row index. Raises
    :class:`NoUnlikeNeighborError` when no row qualifies.
    """
    if train.labels is None:
        raise DistanceError("training dataset has no labels")
    if len(train_predictions) != len(train):
        raise DistanceError("one prediction per training row is required")
    preds = np.asarray(train_predictions, dtype=np.int64)
    labels = np.asarray(train.labels, dtype=np.int64)
    eligible = (preds != predicted_class) & (labels == preds)
    if not bool(eligible.any()):
        raise NoUnlikeNeighborError(
            "no correctly-predicted training instance of the opposite class"
        )
    d = heom_to_rows(stats, x, train, weights)
    d = np.where(eligible, d, np.inf)
    return int(np.argmin(d))
