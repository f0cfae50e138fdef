# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Relative scales and isometry-based outlier detection across point clouds.

Each image yields its own up-to-scale cloud. Distances from every point to
its image-space nearest neighbours should agree across images once the
clouds share a scale; points whose distances vary too much are outliers.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import warnings
from collections import deque
from collections.abc import Mapping

import numpy as np
import scipy.spatial.distance
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError

__all__ = (
    "InlierLabels",
    "NeighborGraph",
    "PointLabel",
    "ScaleSet",
    "build_nng",
    "classify_inliers",
    "distance_profiles",
    "estimate_scales",
    "pairwise_scale_ratios",
    "propagate_scales",
    "rescale_profiles",
)

logger = logging.getLogger(__name__)

MIN_DISTANCE = 1e-12
MIN_EVALUABLE = 3


class PointLabel(enum.IntEnum):
    OUTLIER = 0
    INLIER = 1
    UNDETERMINED = 2


@dataclasses.dataclass(frozen=True)
class NeighborGraph:
    indices: NDArray[np.intp]

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def r(self) -> int:
        return self.indices.shape[1]


def build_nng(anchor_points: ArrayLike, r: int = 20) -> NeighborGraph:
    """Exact ``r``-nearest neighbours in the anchor image, ties to the lower index."""
    pts = np.asarray(anchor_points, dtype=np.float64)
    if len(pts) < 2:
        raise DomainError("a neighbour graph needs at least 2 points")
    dist = scipy.spatial.distance.cdist(pts, pts)
    np.fill_diagonal(dist, np.inf)
    count = min(r, len(pts) - 1)
    order = np.argsort(dist, axis=1, kind="stable")[:, :count]
    return NeighborGraph(order.astype(np.intp))


def distance_profiles(
    clouds: ArrayLike,
    graph: NeighborGraph,
    visible: ArrayLike | None = None,
) -> NDArray[np.float64]:
    """``P[i, j, l]``: distance in cloud ``i`` from point ``j`` to its ``l``-th neighbour.

    Missing points (NaN rows or masked out by ``visible``) give NaN entries.
    """
    X = np.array(clouds, dtype=np.float64)
    if visible is not None:
        X[~np.asarray(visible, dtype=bool)] = np.nan
    return np.linalg.norm(X[:, :, None, :] - X[:, graph.indices, :], axis=-1)


def pairwise_scale_ratios(profiles: NDArray[np.float64]) -> dict[tuple[int, int], float]:
    """``ratios[(a, b)] = alpha_b / alpha_a`` as the median distance ratio."""
    count = len(profiles)
    ratios = {}
    for a in range(count):
        for b in range(a + 1, count):
            base = profiles[a]
            other = profiles[b]
            ok = np.isfinite(base) & np.isfinite(other) & (base >= MIN_DISTANCE)
            if ok.any():
                ratios[(a, b)] = float(np.median(other[ok] / base[ok]))
    return ratios


@dataclasses.dataclass(frozen=True)
class ScaleSet:
    alpha: NDArray[np.float64]
    components: NDArray[np.intp]

    @property
    def reachable(self) -> NDArray[np.bool_]:
        """Images sharing the gauge of image 0."""
        return self.components == self.components[0]


def propagate_scales(
    ratios: Mapping[tuple[int, int], float],
    count: int,
    root: int = 0,
) -> ScaleSet:
    """Chain pairwise ratios along breadth-first shortest paths.

    ``ratios[(a, b)]`` is ``alpha_b / alpha_a``. Neighbours are visited in
    index order, so the path choice is deterministic. Images out of reach of
    ``root`` form their own gauge groups rooted at their lowest index.
    """
    neighbours: dict[int, dict[int, float]] = {i: {} for i in range(count)}
    for (a, b), ratio in ratios.items():
        if not ratio > 0:
            continue
        neighbours[a][b] = ratio
        neighbours[b][a] = 1.0 / ratio

    alpha = np.full(count, np.nan)
    components = np.full(count, -1, dtype=np.intp)
    starts = [root, *(i for i in range(count) if i != root)]
    group = 0
    for start in starts:
        if components[start] >= 0:
            continue
        if group:
            logger.warning("image %d has no scale path to image %d", start, root)
        alpha[start] = 1.0
        components[start] = group
        queue = deque([start])
        while queue:
            a = queue.popleft()
            for b in sorted(neighbours[a]):
                if components[b] < 0:
                    alpha[b] = alpha[a] * neighbours[a][b]
                    components[b] = group
                    queue.append(b)
        group += 1
    return ScaleSet(alpha=alpha, components=components)


def estimate_scales(
    clouds: ArrayLike,
    graph: NeighborGraph,
    visible: ArrayLike | None = None,
) -> ScaleSet:
    profiles = distance_profiles(clouds, graph, visible)
    return propagate_scales(pairwise_scale_ratios(profiles), len(profiles))


def rescale_profiles(profiles: NDArray[np.float64], scales: ScaleSet) -> NDArray[np.float64]:
    """Bring every image's distances to the scale of its gauge root."""
    return profiles / scales.alpha[:, None, None]


@dataclasses.dataclass(frozen=True)
class InlierLabels:
    labels: NDArray[np.int8]
    fraction: NDArray[np.float64]
    evaluable: NDArray[np.intp]

    @property
    def inliers(self) -> NDArray[np.bool_]:
        return self.labels == PointLabel.INLIER


def classify_inliers(
    Q: ArrayLike,
    visibility: ArrayLike | None = None,
    tolerance: float = 0.10,
    fraction: float = 0.5,
) -> InlierLabels:
    """Label each point from the agreement of its rescaled neighbour distances.

    An (image, neighbour) pair is consistent when its distance is within
    ``tolerance`` times the mean neighbourhood distance of the per-edge
    median across images. Points consistent on more than ``fraction`` of
    their evaluable pairs are inliers; fewer than three evaluable pairs leave
    a point undetermined.
    """
    q = np.array(Q, dtype=np.float64)
    if visibility is not None:
        q[~np.asarray(visibility, dtype=bool)] = np.nan
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        central = np.nanmedian(q, axis=0)
        threshold = tolerance * np.nanmean(central, axis=1)
    evaluable_mask = np.isfinite(q) & np.isfinite(central)[None]
    with np.errstate(invalid="ignore"):
        consistent = evaluable_mask & (
            np.abs(q - central[None]) < threshold[None, :, None]
        )
    evaluable = evaluable_mask.sum(axis=(0, 2))
    good = consistent.sum(axis=(0, 2))
    share = np.divide(good, evaluable, out=np.zeros(len(evaluable)), where=evaluable > 0)
    labels = np.where(share > fraction, PointLabel.INLIER, PointLabel.OUTLIER).astype(np.int8)
    labels[evaluable < MIN_EVALUABLE] = PointLabel.UNDETERMINED
    return InlierLabels(labels=labels, fraction=share, evaluable=evaluable.astype(np.intp))
