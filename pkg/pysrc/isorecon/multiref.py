# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Reference selection by cross-reference consensus.

Every image of the current set reconstructs the correspondence as reference.
Two references agree when the normals they produce for the same images are
close. The reference that disagrees most is dropped, together with its
image, until the best one agrees with the others to within ``epsilon``
degrees or too few images remain.
"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Collection

import numpy as np
from numpy.typing import NDArray

from .errors import IsoReconError
from .geometry import angle_between
from .normals import NormalEstimate, TrackObservations, estimate_normals

__all__ = (
    "ConsistencyScores",
    "ReferenceMatrix",
    "ReferenceSelection",
    "build_reference_matrix",
    "consistency_scores",
    "pairwise_inconsistency",
    "select_reference",
)

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class ReferenceMatrix:
    """``normals[i, k]``: normal of image ``k`` with ``references[i]`` as reference."""

    references: tuple[int, ...]
    images: tuple[int, ...]
    normals: NDArray[np.float64]
    estimates: tuple[NormalEstimate | None, ...] = ()

    def row(self, t: int) -> NDArray[np.float64]:
        return self.normals[self.references.index(t)]


@dataclasses.dataclass(frozen=True)
class ConsistencyScores:
    S: NDArray[np.float64]
    U: NDArray[np.float64]
    G: float

    @property
    def best(self) -> int:
        # argmin/argmax return the first occurrence, i.e. the lowest index
        return int(np.argmin(self.U))

    @property
    def worst(self) -> int:
        return int(np.argmax(self.U))


def pairwise_inconsistency(V: ReferenceMatrix, t: int, u: int) -> float:
    """Median angle in degrees between the normals references ``t`` and ``u`` give."""
    columns = list(V.images)
    a = V.row(t)[columns]
    b = V.row(u)[columns]
    both = np.all(np.isfinite(a), axis=1) & np.all(np.isfinite(b), axis=1)
    if not both.any():
        return float("inf")
    return float(np.median(angle_between(a[both], b[both])))


def consistency_scores(V: ReferenceMatrix) -> ConsistencyScores:
    n = len(V.references)
    S = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            S[i, j] = S[j, i] = pairwise_inconsistency(V, V.references[i], V.references[j])
    if n == 1:
        U = np.zeros(1) if np.isfinite(V.normals[0]).any() else np.full(1, np.inf)
    else:
        U = np.array([np.median(np.delete(S[i], i)) for i in range(n)])
    return ConsistencyScores(S=S, U=U, G=float(np.min(U)))


def build_reference_matrix(
    track: TrackObservations,
    images: Collection[int],
    references: Collection[int],
    solver: str = "resultant",
    rng: np.random.Generator | None = None,
    flag_factor: float = 10.0,
) -> ReferenceMatrix:
    image_set = tuple(sorted(images))
    refs = tuple(sorted(references))
    normals = np.full((len(refs), len(track.points), 3), np.nan)
    estimates: list[NormalEstimate | None] = []
    for i, t in enumerate(refs):
        try:
            est = estimate_normals(track.view(t, image_set), solver, rng, flag_factor)
        except IsoReconError as exc:
            logger.debug("track %d, reference %d: %s", track.track_id, t, exc)
            estimates.append(None)
            continue
        estimates.append(est)
        normals[i] = est.normals
    return ReferenceMatrix(refs, image_set, normals, tuple(estimates))


@dataclasses.dataclass(frozen=True)
class ReferenceSelection:
    reference: int | None
    normals: NDArray[np.float64]
    shapes: NDArray[np.float64]
    surviving: tuple[int, ...]
    iterations: int
    scores: ConsistencyScores | None = None

    @property
    def rejected(self) -> bool:
        return self.reference is None


def _rejected(track: TrackObservations, iterations: int, scores=None) -> ReferenceSelection:
    count = len(track.points)
    return ReferenceSelection(
        reference=None,
        normals=np.full((count, 3), np.nan),
        shapes=np.full((count, 2), np.nan),
        surviving=(),
        iterations=iterations,
        scores=scores,
    )


def select_reference(
    track: TrackObservations,
    epsilon: float = 5.0,
    min_size: int = 5,
    *,
    solver: str = "resultant",
    rng: np.random.Generator | int | None = None,
    flag_factor: float = 10.0,
    images: Collection[int] | None = None,
    references: Collection[int] | None = None,
) -> ReferenceSelection:
    """Drop the least consistent reference until the best agrees within ``epsilon``.

    Args:
        track: The correspondence and its warp differentials.
        epsilon: Consensus threshold in degrees.
        min_size: Below this many images the correspondence is rejected.
        solver: Pair solver name, see ``PAIR_SOLVERS``.
        rng: Seed or generator driving the pair selection.
        flag_factor: Residual flag factor of the base estimator.
        images: Initial image set; defaults to every image seeing the point.
        references: Images allowed to act as reference; defaults to all.

    Returns:
        The selected reference with its normals and the surviving images, or a
        rejected selection with ``reference=None``.
    """
    generator = np.random.default_rng(rng)
    candidates = range(len(track.points)) if images is None else images
    current = sorted(int(k) for k in candidates if track.visible[k])
    allowed = None if references is None else {int(t) for t in references}
    iterations = 0
    scores = None
    while len(current) >= 3:
        iterations += 1
        refs = [t for t in current if allowed is None or t in allowed]
        if not refs:
            break
        V = build_reference_matrix(track, current, refs, solver, generator, flag_factor)
        scores = consistency_scores(V)
        if scores.G < epsilon:
            best = refs[scores.best]
            est = V.estimates[scores.best]
            assert est is not None
            mask = np.zeros(len(track.points), dtype=bool)
            mask[current] = True
            return ReferenceSelection(
                reference=best,
                normals=np.where(mask[:, None], V.row(best), np.nan),
                shapes=np.where(mask[:, None], est.shapes, np.nan),
                surviving=tuple(current),
                iterations=iterations,
                scores=scores,
            )
        if len(current) < min_size:
            break
        dropped = refs[scores.worst]
        logger.debug(
            "track %d: dropping image %d (U=%.3g deg)",
            track.track_id,
            dropped,
            scores.U[scores.worst],
        )
        current.remove(dropped)
    return _rejected(track, iterations, scores)
