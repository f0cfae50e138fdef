# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Integration of a scattered shape field into an up-to-scale surface.

The shape ``(x, y)`` is the gradient of ``ln beta``, so along every edge of a
k-nearest-neighbour graph ``ln beta_j - ln beta_i`` is predicted by the
trapezoidal average of the endpoint gradients. The resulting sparse linear
least-squares problem is solved per connected component with the gauge
``mean(ln beta) = 0``.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph
import scipy.sparse.linalg
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

from .errors import DomainError

__all__ = ("GradientField", "UpToScaleSurface", "integrate", "knn_edges")

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class GradientField:
    points: NDArray[np.float64]
    shapes: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.points.shape != self.shapes.shape or self.points.ndim != 2:
            raise DomainError("points and shapes must both have shape (n, 2)")
        if len(self.points) < 3:
            raise DomainError("integration needs at least 3 samples")
        if not (np.all(np.isfinite(self.points)) and np.all(np.isfinite(self.shapes))):
            raise DomainError("gradient field contains non-finite samples")

    @classmethod
    def from_arrays(cls, points: ArrayLike, shapes: ArrayLike) -> GradientField:
        return cls(np.asarray(points, dtype=np.float64), np.asarray(shapes, dtype=np.float64))


@dataclasses.dataclass(frozen=True)
class UpToScaleSurface:
    beta: NDArray[np.float64]
    points3d: NDArray[np.float64]
    residual: float
    components: NDArray[np.intp]

    @property
    def n_components(self) -> int:
        return int(self.components.max(initial=-1)) + 1

    @property
    def multi_component(self) -> bool:
        return self.n_components > 1


def knn_edges(points: NDArray[np.float64], k: int) -> NDArray[np.intp]:
    """Undirected edges ``(i, j)``, ``i < j``, of the k-nearest-neighbour graph."""
    n = len(points)
    k = min(k, n - 1)
    _, idx = cKDTree(points).query(points, k=k + 1)
    rows = np.repeat(np.arange(n), k)
    cols = idx[:, 1:].reshape(-1)
    pairs = np.sort(np.stack((rows, cols), axis=1), axis=1)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    return np.unique(pairs, axis=0)


def integrate(field: GradientField, k: int = 6) -> UpToScaleSurface:
    p = field.points
    g = field.shapes
    n = len(p)
    edges = knn_edges(p, k)
    i, j = edges[:, 0], edges[:, 1]
    m = len(edges)
    rhs = 0.5 * np.sum((g[i] + g[j]) * (p[j] - p[i]), axis=1)
    data = np.concatenate((-np.ones(m), np.ones(m)))
    A = scipy.sparse.csr_matrix(
        (data, (np.tile(np.arange(m), 2), np.concatenate((i, j)))),
        shape=(m, n),
    )

    adjacency = scipy.sparse.csr_matrix((np.ones(m), (i, j)), shape=(n, n))
    count, labels = scipy.sparse.csgraph.connected_components(adjacency, directed=False)
    if count > 1:
        logger.debug("integration graph has %d components", count)

    log_beta = np.zeros(n)
    normal = (A.T @ A).tocsc()
    b = A.T @ rhs
    for c in range(count):
        members = np.flatnonzero(labels == c)
        if len(members) == 1:
            continue
        # pin the first member, then recentre to zero mean
        free = members[1:]
        sub = normal[free][:, free]
        log_beta[free] = scipy.sparse.linalg.spsolve(sub, b[free])
        log_beta[members] -= log_beta[members].mean()

    misfit = A @ log_beta - rhs
    scale = max(float(np.linalg.norm(rhs)), 1e-300)
    beta = np.exp(log_beta)
    points3d = np.column_stack((p[:, 0], p[:, 1], np.ones(n))) / beta[:, None]
    return UpToScaleSurface(
        beta=beta,
        points3d=points3d,
        residual=float(np.linalg.norm(misfit) / scale),
        components=labels.astype(np.intp),
    )
