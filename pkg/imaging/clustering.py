"""
imaging.clustering
~~~~~~~~~~~~~~~~~~

One-dimensional K-means on pixel intensities, used as the alternative
lung / background separator.
"""

import logging
from typing import Tuple

import numpy as np
from sklearn.cluster import KMeans

from .slices import BinaryMask, CtSlice, DegenerateHistogramError

log = logging.getLogger(__name__)

MAX_ITERATIONS = 100
CENTROID_SHIFT = 1e-6


def initial_centroids(levels: np.ndarray, counts: np.ndarray, k: int) -> np.ndarray:
    """The k evenly spaced quantiles (i + 0.5) / k of the pixel intensities.

    ``levels`` are the sorted distinct intensities and ``counts`` their
    pixel counts, so the quantiles follow the histogram and not the list
    of distinct levels.
    """
    positions = (np.arange(k) + 0.5) * counts.sum() / k
    idx = np.searchsorted(np.cumsum(counts), positions, side="right")
    return levels[np.minimum(idx, len(levels) - 1)].astype(np.float64)


def cluster_levels(values: np.ndarray, k: int, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """K-means on scalar values.

    Clusters the distinct values weighted by their counts, which gives the
    same iterates as clustering every pixel at a fraction of the cost.
    Lloyd iterations stop once no centroid moves by ``CENTROID_SHIFT`` or
    after ``MAX_ITERATIONS``. The quantile init is deterministic, so
    ``seed`` does not change the result.

    Returns:
        (centroids sorted ascending, per-value cluster index into them)

    Raises:
        DegenerateHistogramError: if there are fewer distinct values than k.
    """
    levels, inverse, counts = np.unique(
        values.astype(np.float64).ravel(), return_inverse=True, return_counts=True
    )
    if len(levels) < k:
        raise DegenerateHistogramError(
            f"{len(levels)} distinct values cannot form {k} clusters"
        )

    # sklearn stops when the summed squared centroid shift drops under
    # tol * var(X); scale tol so that means a shift under CENTROID_SHIFT.
    tol = CENTROID_SHIFT ** 2 / float(np.var(levels))
    model = KMeans(
        n_clusters=k,
        init=initial_centroids(levels, counts, k).reshape(k, 1),
        n_init=1,
        max_iter=MAX_ITERATIONS,
        tol=tol,
    )
    assign = model.fit_predict(levels.reshape(-1, 1), sample_weight=counts)
    log.debug("K-means (seed %d) finished after %d iterations", seed, model.n_iter_)

    centroids = model.cluster_centers_.ravel()
    order = np.argsort(centroids, kind="stable")
    rank = np.empty(k, dtype=int)
    rank[order] = np.arange(k)
    return centroids[order], rank[assign][inverse].reshape(values.shape)


def kmeans_segment(image: CtSlice, k: int, seed: int = 0) -> BinaryMask:
    """Cluster pixel intensities into k groups; the darkest cluster is lung.

    Raises:
        ValueError: if k < 2.
        DegenerateHistogramError: if the slice has fewer than k distinct values.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    centroids, labels = cluster_levels(image.pixels, k, seed)
    log.info(
        "K-means on %r with k=%d: centroids=%s",
        image.source_id,
        k,
        np.array2string(centroids, precision=3),
    )
    return BinaryMask(labels == 0)
