# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Shape and normal estimation for one correspondence with a fixed reference.

Every other visible image contributes one cubic pair against the reference.
A handful of pairs are solved exactly; the candidate with the smallest
residual over all pairs seeds a Levenberg-Marquardt refinement over the
images that were not flagged, and the refined reference shape is transferred
to every image through the warp differentials.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from collections.abc import Callable, Collection, Mapping
from functools import cached_property
from typing import Any, NamedTuple

import numpy as np
import scipy.optimize
from numpy.typing import ArrayLike, NDArray

from .cubics import CubicPair, assemble_cubics, transfer_offset
from .errors import (
    DegenerateNormalError,
    DegeneratePairError,
    DomainError,
    NoRealSolutionError,
    UnreconstructableError,
)
from .geometry import LocalShape, NormalizedPoint, normal_from_shape
from .resultant import solve_pair_resultant
from .roots import SolutionSet
from .substitution import solve_pair_substitution
from .warp import PairDifferentials

__all__ = (
    "PAIR_SOLVERS",
    "CorrespondenceView",
    "NormalEstimate",
    "Refinement",
    "TrackObservations",
    "estimate_normals",
    "initialize_shape",
    "refine_shape",
    "transfer_shape",
)

logger = logging.getLogger(__name__)

PAIR_SOLVERS: dict[str, Callable[[CubicPair], SolutionSet]] = {
    "resultant": solve_pair_resultant,
    "substitution": solve_pair_substitution,
}

MIN_VISIBLE = 3
MIN_SELECTED = 10


@dataclasses.dataclass(frozen=True)
class CorrespondenceView:
    """One correspondence seen from one reference image.

    ``differentials[k]`` belongs to the warp carrying image ``k`` onto the
    reference, evaluated at ``points[k]``. It is ``None`` for the reference
    itself and wherever the point is invisible or the warp is missing.
    """

    reference: int
    points: NDArray[np.float64]
    visible: NDArray[np.bool_]
    differentials: tuple[PairDifferentials | None, ...]
    track_id: int = 0
    memo: dict[Any, Any] = dataclasses.field(
        default_factory=dict,
        repr=False,
        compare=False,
    )

    def __post_init__(self) -> None:
        if not self.visible[self.reference]:
            raise DomainError("the reference image must see the point")
        if len(self.differentials) != len(self.points):
            raise DomainError("one differentials entry is needed per image")

    @property
    def reference_point(self) -> NormalizedPoint:
        u, v = self.points[self.reference]
        return NormalizedPoint(float(u), float(v))

    @cached_property
    def pairs(self) -> dict[int, CubicPair]:
        """Cubic pairs against the reference, keyed by image index."""
        out: dict[int, CubicPair] = {}
        for k, d in enumerate(self.differentials):
            if d is None or k == self.reference:
                continue
            key = ("pair", self.reference, k)
            if key not in self.memo:
                try:
                    pair: CubicPair | None = assemble_cubics(self.reference_point, d)
                except DegeneratePairError:
                    pair = None
                self.memo[key] = None if pair is None or pair.is_degenerate else pair
            if self.memo[key] is not None:
                out[k] = self.memo[key]
        return out

    def solve(self, k: int, solver: str) -> SolutionSet | None:
        key = ("solve", solver, self.reference, k)
        if key not in self.memo:
            try:
                self.memo[key] = PAIR_SOLVERS[solver](self.pairs[k])
            except (DegeneratePairError, NoRealSolutionError) as exc:
                logger.debug("pair (%d, %d) skipped: %s", self.reference, k, exc)
                self.memo[key] = None
        return self.memo[key]


@dataclasses.dataclass(frozen=True)
class TrackObservations:
    """A correspondence across a subset together with all warp differentials.

    ``differentials[(k, t)]`` is taken from the warp carrying image ``k`` onto
    image ``t`` at the observation in image ``k``.
    """

    track_id: int
    points: NDArray[np.float64]
    visible: NDArray[np.bool_]
    differentials: Mapping[tuple[int, int], PairDifferentials]
    memo: dict[Any, Any] = dataclasses.field(
        default_factory=dict,
        repr=False,
        compare=False,
    )

    def view(self, reference: int, images: Collection[int] | None = None) -> CorrespondenceView:
        allowed = set(range(len(self.points)) if images is None else images)
        visible = np.array(
            [bool(self.visible[k]) and k in allowed for k in range(len(self.points))],
        )
        diffs = tuple(
            self.differentials.get((k, reference)) if visible[k] and k != reference else None
            for k in range(len(self.points))
        )
        return CorrespondenceView(
            reference=reference,
            points=self.points,
            visible=visible,
            differentials=diffs,
            track_id=self.track_id,
            memo=self.memo,
        )


def _residuals(pairs: Mapping[int, CubicPair], s: ArrayLike) -> dict[int, float]:
    return {
        k: float(np.sum(np.abs(pair.normalized().evaluate([s])[0])))
        for k, pair in pairs.items()
    }


def initialize_shape(
    cv: CorrespondenceView,
    solver: str = "resultant",
    rng: np.random.Generator | int | None = None,
    flag_factor: float = 10.0,
) -> tuple[LocalShape, NDArray[np.bool_]]:
    """Pick the best exact pair solution and flag inconsistent images.

    Solves ``max(ceil(0.1 M), 10)`` randomly chosen pairs (all of them when
    fewer are available) and scores every candidate by the summed
    ``|A| + |B|`` over all pairs. Images whose residual exceeds
    ``flag_factor`` times the median are flagged.
    """
    if solver not in PAIR_SOLVERS:
        raise DomainError(f"unknown pair solver {solver!r}")
    if int(np.count_nonzero(cv.visible)) < MIN_VISIBLE:
        raise UnreconstructableError("fewer than 3 images see the point")
    pairs = cv.pairs
    if not pairs:
        raise UnreconstructableError("every image pair is degenerate")

    generator = np.random.default_rng(rng)
    keys = sorted(pairs)
    count = min(max(math.ceil(0.1 * int(np.count_nonzero(cv.visible))), MIN_SELECTED), len(keys))
    selected = generator.choice(keys, size=count, replace=False)

    candidates = []
    for k in sorted(int(k) for k in selected):
        solutions = cv.solve(k, solver)
        if solutions is not None:
            candidates.extend(solutions.shapes)
    if not candidates:
        raise UnreconstructableError("no pair produced a real solution")

    best: tuple[float, NDArray[np.float64], dict[int, float]] | None = None
    for s in candidates:
        per_image = _residuals(pairs, s)
        total = sum(per_image.values())
        if best is None or total < best[0]:
            best = (total, np.asarray(s), per_image)
    assert best is not None
    _, shape, per_image = best

    flags = np.zeros(len(cv.points), dtype=bool)
    median = float(np.median(list(per_image.values())))
    for k, r in per_image.items():
        flags[k] = r > flag_factor * median
    return LocalShape(float(shape[0]), float(shape[1])), flags


class Refinement(NamedTuple):
    shape: LocalShape
    cost: float
    initial_cost: float
    diverged: bool


def refine_shape(
    cv: CorrespondenceView,
    init: LocalShape,
    flags: ArrayLike,
) -> Refinement:
    """Levenberg-Marquardt on the stacked ``(A_k, B_k)`` of unflagged images."""
    flagged = np.asarray(flags, dtype=bool)
    pairs = [pair.normalized() for k, pair in sorted(cv.pairs.items()) if not flagged[k]]
    x0 = np.array(init, dtype=np.float64)
    if not pairs:
        return Refinement(init, 0.0, 0.0, diverged=False)

    def fun(s: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.concatenate([pair.evaluate([s])[0] for pair in pairs])

    def jac(s: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.vstack([pair.jacobian(s) for pair in pairs])

    r0 = fun(x0)
    initial = 0.5 * float(r0 @ r0)
    try:
        result = scipy.optimize.least_squares(
            fun,
            x0,
            jac=jac,
            method="lm",
            xtol=1e-10,
            ftol=1e-12,
            gtol=1e-12,
            max_nfev=100,
        )
    except (ValueError, np.linalg.LinAlgError) as exc:
        logger.debug("refinement failed for track %d: %s", cv.track_id, exc)
        return Refinement(init, initial, initial, diverged=True)
    if not np.all(np.isfinite(result.x)) or not result.cost <= initial:
        logger.debug("refinement diverged for track %d", cv.track_id)
        return Refinement(init, initial, initial, diverged=True)
    shape = LocalShape(float(result.x[0]), float(result.x[1]))
    return Refinement(shape, float(result.cost), initial, diverged=False)


def transfer_shape(ref_shape: LocalShape, d: PairDifferentials) -> LocalShape:
    """Shape in the second image: ``J^T s - [[0, 1], [1, 0]] J^-1 (h3, h4)``."""
    if d.degenerate:
        raise DegeneratePairError(f"warp Jacobian determinant {d.det:g} is degenerate")
    x2, y2 = d.J.T @ np.asarray(ref_shape, dtype=np.float64) + transfer_offset(d)
    return LocalShape(float(x2), float(y2))


@dataclasses.dataclass(frozen=True)
class NormalEstimate:
    reference: int
    shape: LocalShape
    shapes: NDArray[np.float64]
    normals: NDArray[np.float64]
    flagged: NDArray[np.bool_]
    residual: float
    diverged: bool = False

    @property
    def available(self) -> NDArray[np.bool_]:
        return np.all(np.isfinite(self.normals), axis=1)


def estimate_normals(
    cv: CorrespondenceView,
    solver: str = "resultant",
    rng: np.random.Generator | int | None = None,
    flag_factor: float = 10.0,
) -> NormalEstimate:
    init, flags = initialize_shape(cv, solver, rng, flag_factor)
    refined = refine_shape(cv, init, flags)

    count = len(cv.points)
    shapes = np.full((count, 2), np.nan)
    normals = np.full((count, 3), np.nan)
    shapes[cv.reference] = refined.shape
    for k, d in enumerate(cv.differentials):
        if d is None or k == cv.reference or d.degenerate:
            continue
        shapes[k] = transfer_shape(refined.shape, d)
    for k in np.flatnonzero(np.all(np.isfinite(shapes), axis=1)):
        u, v = cv.points[k]
        try:
            normals[k] = normal_from_shape(NormalizedPoint(u, v), LocalShape(*shapes[k]))
        except DegenerateNormalError:
            shapes[k] = np.nan
    return NormalEstimate(
        reference=cv.reference,
        shape=refined.shape,
        shapes=shapes,
        normals=normals,
        flagged=flags,
        residual=refined.cost,
        diverged=refined.diverged,
    )
