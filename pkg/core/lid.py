"""Intrinsic-dimension estimators on point clouds.

Neighbors come from an exact linear scan; nothing here builds an index.
"""
import logging
import math
from typing import Sequence, Tuple

import numpy as np
from scipy import stats

import config
from core import geometry
from core.errors import DegenerateInputError, InsufficientDataError, require
from core.parallel import ordered_map
from models.geometry import ShapeSpec
from models.lid import LidEstimate, LidGap, PointCloud

logger = logging.getLogger("LID")


def box_counting_dimension(cloud: PointCloud, epsilons: Sequence[float]) -> LidEstimate:
    """Slope of ln N(eps) against ln(1/eps), grid anchored at the cloud minimum."""
    eps = np.asarray(epsilons, dtype=float)
    require(len(eps) >= 4, f"need >= 4 epsilons, got {len(eps)}", InsufficientDataError)
    require(np.all(eps > 0) and np.all(np.diff(eps) < 0), "epsilons must be positive and strictly decreasing")
    require(eps[0] / eps[-1] >= 4.0, "epsilons must span at least two octaves", InsufficientDataError)
    require(cloud.count >= 100, f"need >= 100 points, got {cloud.count}", InsufficientDataError)
    if np.all(np.ptp(cloud.points, axis=0) == 0):
        raise DegenerateInputError("all points are identical")

    shifted = cloud.points - cloud.points.min(axis=0)
    counts = [len(np.unique(np.floor(shifted / e).astype(np.int64), axis=0)) for e in eps]
    fit = stats.linregress(np.log(1.0 / eps), np.log(counts))
    return LidEstimate(
        value=max(0.0, float(fit.slope)),
        method="box_counting",
        support={"epsilons": eps.tolist(), "counts": counts, "slope_stderr": float(fit.stderr),
                 "intercept": float(fit.intercept), "n_points": cloud.count},
    )


def expansion_dimension(v1: float, v2: float, r1: float, r2: float) -> float:
    """ln(V2/V1) / ln(R2/R1)."""
    require(0 < r1 < r2, f"need 0 < R1 < R2, got R1={r1}, R2={r2}")
    if v1 <= 0:
        raise DegenerateInputError("inner ball is empty")
    require(v2 >= v1, "outer volume is smaller than inner volume")
    return math.log(v2 / v1) / math.log(r2 / r1)


def two_radius_dimension(cloud: PointCloud, center, R1: float, R2: float) -> LidEstimate:
    require(0 < R1 < R2, f"need 0 < R1 < R2, got R1={R1}, R2={R2}")
    d = _distances(cloud, center)
    c1, c2 = int(np.sum(d <= R1)), int(np.sum(d <= R2))
    if c1 == 0:
        raise DegenerateInputError(f"no points within R1={R1}")
    require(c1 >= 5, f"inner ball holds {c1} points, need >= 5", InsufficientDataError)
    return LidEstimate(
        value=expansion_dimension(c1, c2, R1, R2),
        method="two_radius",
        support={"R1": R1, "R2": R2, "count1": c1, "count2": c2},
    )


def _distances(cloud: PointCloud, query) -> np.ndarray:
    q = np.asarray(query, dtype=float)
    require(q.shape == (cloud.dim,), f"query has shape {q.shape}, expected ({cloud.dim},)")
    return np.linalg.norm(cloud.points - q, axis=1)


def nearest_neighbors(cloud: PointCloud, query, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Indices and distances of the k nearest points (stable ranks, ties by index)."""
    require(1 <= k <= cloud.count, f"k={k} outside [1, {cloud.count}]")
    d = _distances(cloud, query)
    order = np.argsort(d, kind="stable")[:k]
    return order, d[order]


def knn_lid(cloud: PointCloud, query, k: int) -> LidEstimate:
    """MLE -(1/k Σ ln(r_i / r_k))^-1 over the k nearest nonzero distances."""
    require(k >= 10, f"k must be >= 10, got {k}")
    require(cloud.count >= k + 1, f"cloud of {cloud.count} points is too small for k={k}", InsufficientDataError)
    d = np.sort(_distances(cloud, query), kind="stable")
    excluded = int(np.sum(d == 0.0))
    r = d[excluded:excluded + k]
    if len(r) < k:
        raise DegenerateInputError(f"query coincides with {excluded} points; {len(r)} nonzero distances left")
    mean_log = float(np.mean(np.log(r / r[-1])))
    if mean_log == 0.0:
        raise DegenerateInputError("all k neighbor distances are equal")
    return LidEstimate(
        value=-1.0 / mean_log,
        method="knn_mle",
        support={"k": k, "excluded": excluded, "r_k": float(r[-1])},
    )


def knn_lid_batch(cloud: PointCloud, queries, k: int) -> np.ndarray:
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    return np.asarray(ordered_map(lambda q: knn_lid(cloud, q, k).value, list(queries)))


def surface_interior_lid_gap(shape: ShapeSpec, cloud: PointCloud, boundary_band: float, k: int,
                             max_queries: int = None) -> LidGap:
    """Median knn LID of near-surface versus interior points of a shape-sampled cloud.

    Points beyond the boundary count as surface points.
    """
    require(0 < boundary_band < 0.5, f"boundary_band must lie in (0, 0.5), got {boundary_band}")
    require(cloud.count >= 10_000, f"need >= 10^4 points, got {cloud.count}", InsufficientDataError)
    max_queries = max_queries or config.LID_QUERY_CAP
    d = geometry.distance_to_surface_batch(shape, cloud.points)
    surface = np.isnan(d) | (d <= boundary_band * geometry.radius_of(shape))
    groups = {"interior": np.flatnonzero(~surface), "surface": np.flatnonzero(surface)}
    for name, idx in groups.items():
        if len(idx) == 0:
            raise DegenerateInputError(f"{name} partition is empty")

    medians = {}
    for name, idx in groups.items():
        values = knn_lid_batch(cloud, cloud.points[idx[:max_queries]], k)
        medians[name] = float(np.median(values))
    logger.info("LID interior %.3f, surface %.3f", medians["interior"], medians["surface"])
    return LidGap(
        median_interior=medians["interior"],
        median_surface=medians["surface"],
        n_interior=len(groups["interior"]),
        n_surface=len(groups["surface"]),
    )
