"""Query-side estimators over a sketch.

A query reads one counter per row (the row's bucket for the query point).
The mean of those reads is an unbiased estimate of the kernel sum f_D(q);
the median-of-means aggregation trades a constant for exponential
concentration and is what the utility bound covers. The dataset size is
estimated as the grand counter total divided by the row count, since each
row of a clean sketch sums to N (noise is zero-mean up to the floor offset).
Negative values can appear after privatization: the raw estimate is reported
as-is, while the normalized density clamps at zero and the size estimate is
floored at one before dividing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lsh
from .errors import InsufficientRowsError, InvalidParameterError
from .lsh import LshFamily
from .sketch import RaceSketch

_N_FLOOR = 1.0


@dataclass
class QueryEstimate:
    """Per-query output bundle."""

    f_hat: float              # estimated kernel sum
    n_hat: float              # estimated dataset size
    kde: float                # normalized density, max(f_hat, 0) / max(n_hat, 1)
    row_values: np.ndarray    # the R per-row counter reads
    estimator: str            # "mean" or "median_of_means"


def mom_group_count(delta: float) -> int:
    """Number of median-of-means groups for failure probability delta."""
    if not 0.0 < delta < 1.0:
        raise InvalidParameterError(f"delta must be in (0, 1), got {delta}")
    return math.ceil(8.0 * math.log(1.0 / delta))


def _gather(sketch: RaceSketch, points) -> np.ndarray:
    """Counter reads for each query: shape (rows, n_queries)."""
    buckets = lsh.hash_batch(sketch.family, sketch.rows, points)
    return sketch.counts[np.arange(sketch.rows)[:, None], buckets]


def _mom_aggregate(values: np.ndarray, delta: float) -> np.ndarray:
    """Median of k contiguous group means along axis 0; surplus rows ignored."""
    rows = values.shape[0]
    k = mom_group_count(delta)
    m = rows // k
    if m < 1:
        raise InsufficientRowsError(
            f"median-of-means at delta={delta} needs k={k} groups, "
            f"but the sketch has only {rows} rows")
    groups = values[:k * m].reshape(k, m, *values.shape[1:])
    return np.median(groups.mean(axis=1), axis=0)


def _estimate(sketch, points, estimator: str, delta: float):
    values = _gather(sketch, points)
    if estimator == "mean":
        f_hat = values.mean(axis=0)
    elif estimator == "median_of_means":
        f_hat = _mom_aggregate(values, delta)
    else:
        raise InvalidParameterError(f"unknown estimator {estimator!r}")
    n_hat = float(sketch.counts.sum()) / sketch.rows
    kde = np.maximum(f_hat, 0.0) / max(n_hat, _N_FLOOR)
    return f_hat, n_hat, kde, values


def query_mean(sketch: RaceSketch, q) -> QueryEstimate:
    """Mean-of-rows estimate of the kernel sum at q, with N-hat normalization."""
    qv = lsh._as_vector(q, sketch.family.dim)
    f_hat, n_hat, kde, values = _estimate(sketch, qv[None, :], "mean", 0.5)
    return QueryEstimate(float(f_hat[0]), n_hat, float(kde[0]), values[:, 0], "mean")


def query_median_of_means(sketch: RaceSketch, q, delta: float = 0.1) -> QueryEstimate:
    """Median-of-means estimate covered by the utility bound at failure rate delta.

    Rows are split into k = ceil(8 ln(1/delta)) contiguous groups of equal
    size; rows beyond k * floor(rows / k) are ignored. The median of an even
    group count is the average of the two central means.
    """
    qv = lsh._as_vector(q, sketch.family.dim)
    f_hat, n_hat, kde, values = _estimate(sketch, qv[None, :], "median_of_means", delta)
    return QueryEstimate(float(f_hat[0]), n_hat, float(kde[0]), values[:, 0],
                         "median_of_means")


def query_many(sketch: RaceSketch, points, estimator: str = "median_of_means",
               delta: float = 0.1) -> list[QueryEstimate]:
    """Batch form of the query estimators (one pass over the counter array)."""
    pts = lsh._as_matrix(points, sketch.family.dim)
    f_hat, n_hat, kde, values = _estimate(sketch, pts, estimator, delta)
    return [QueryEstimate(float(f_hat[i]), n_hat, float(kde[i]), values[:, i], estimator)
            for i in range(pts.shape[0])]


def error_bound(f_tilde_value: float, rows: int, epsilon: float, delta: float) -> float:
    """High-probability error of the private median-of-means estimate.

    sqrt((f_tilde^2 / R + 2 R / eps^2) * 32 ln(1 / delta)).
    """
    if f_tilde_value < 0 or rows < 1 or not epsilon > 0 or not 0 < delta < 1:
        raise InvalidParameterError(
            f"invalid arguments: f_tilde={f_tilde_value}, rows={rows}, "
            f"epsilon={epsilon}, delta={delta}")
    variance = f_tilde_value**2 / rows + 2.0 * rows / epsilon**2
    return math.sqrt(variance * 32.0 * math.log(1.0 / delta))


def optimal_rows(f_tilde_or_n: float, epsilon: float) -> int:
    """Row count minimizing the error bound: ceil(f_tilde * eps / sqrt(2)), at least 1.

    Callers that cannot evaluate f_tilde may pass the dataset size N, which
    upper-bounds it.
    """
    if not f_tilde_or_n > 0 or not epsilon > 0:
        raise InvalidParameterError(
            f"inputs must be positive, got {f_tilde_or_n}, {epsilon}")
    return max(1, math.ceil(f_tilde_or_n * epsilon / math.sqrt(2.0)))


def f_tilde(data, q, family: LshFamily) -> float:
    """Variance-controlling sum of root kernels over a raw dataset.

    Needs the raw points, so it is for planning row counts and test bounds in
    non-private contexts only.
    """
    pts = lsh._as_matrix(getattr(data, "points", data), family.dim)
    if pts.shape[0] == 0:
        return 0.0
    return float(np.sqrt(lsh.kernel_values(family, pts, q)).sum())
