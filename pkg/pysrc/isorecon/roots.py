# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Univariate root finding and candidate bookkeeping shared by the pair solvers."""

from __future__ import annotations

import dataclasses
from collections.abc import Iterable, Iterator

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.typing import ArrayLike, NDArray

from .cubics import CubicPair, polish_shape
from .geometry import LocalShape

__all__ = (
    "MAX_SOLUTIONS",
    "SolutionSet",
    "collect_solutions",
    "real_roots",
    "trim_leading",
)

REAL_TOLERANCE = 1e-8
DEDUP_TOLERANCE = 1e-6
HUGE_ROOT = 1e6
MAX_SOLUTIONS = 9


def trim_leading(coeffs: ArrayLike, rel: float = 1e-12) -> NDArray[np.float64]:
    """Drop negligible highest-order terms of an ascending coefficient array."""
    c = np.asarray(coeffs, dtype=np.float64)
    if c.size == 0:
        return c
    scale = np.max(np.abs(c))
    if scale == 0:
        return c[:1]
    keep = np.flatnonzero(np.abs(c) > rel * scale)
    return c[: keep[-1] + 1]


def real_roots(
    coeffs: ArrayLike,
    tol: float = REAL_TOLERANCE,
    *,
    fallback: bool = False,
) -> NDArray[np.float64]:
    """Real roots of an ascending-order polynomial, sorted.

    A root counts as real when ``|Im| <= tol * (1 + |Re|)``. With ``fallback``
    the root closest to the real axis is returned if none qualifies.
    """
    c = trim_leading(coeffs)
    if c.size <= 1:
        return np.empty(0)
    roots = P.polyroots(c)
    roots = roots[np.isfinite(roots)]
    real = np.abs(roots.imag) <= tol * (1.0 + np.abs(roots.real))
    if not real.any() and fallback and roots.size:
        real = np.zeros(roots.size, dtype=bool)
        real[np.argmin(np.abs(roots.imag))] = True
    out = roots.real[real]
    return np.sort(out[np.abs(out) <= HUGE_ROOT])


@dataclasses.dataclass(frozen=True)
class SolutionSet:
    """Real shape candidates with their ``|A| + |B|`` residuals, best first."""

    shapes: NDArray[np.float64]
    residuals: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.shapes)

    def __iter__(self) -> Iterator[LocalShape]:
        for x, y in self.shapes:
            yield LocalShape(float(x), float(y))

    @property
    def best(self) -> LocalShape:
        x, y = self.shapes[0]
        return LocalShape(float(x), float(y))

    def contains(self, s: ArrayLike, tol: float = 1e-6) -> bool:
        if not len(self):
            return False
        dist = np.max(np.abs(self.shapes - np.asarray(s, dtype=np.float64)), axis=1)
        return bool(np.min(dist) <= tol)

    @classmethod
    def empty(cls) -> SolutionSet:
        return cls(np.empty((0, 2)), np.empty(0))


def collect_solutions(
    pair: CubicPair,
    candidates: Iterable[ArrayLike],
    *,
    tolerance: float | None = 1e-6,
    keep_best: bool = False,
) -> SolutionSet:
    """Polish, rank and deduplicate candidate shapes of one pair.

    Candidates whose relative residual exceeds ``tolerance`` are dropped;
    with ``keep_best`` the single best one survives regardless.
    """
    polished = []
    for s in candidates:
        arr = np.asarray(s, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            continue
        polished.append(polish_shape(pair, arr))
    if not polished:
        return SolutionSet.empty()
    shapes = np.array(polished)
    residuals = np.sum(np.abs(pair.evaluate(shapes)), axis=1)
    relative = np.array([pair.relative_residual(s) for s in shapes])
    finite = np.isfinite(residuals)
    shapes, residuals, relative = shapes[finite], residuals[finite], relative[finite]
    if not len(shapes):
        return SolutionSet.empty()

    order = np.argsort(residuals, kind="stable")
    kept: list[int] = []
    for i in order:
        if tolerance is not None and relative[i] > tolerance and (kept or not keep_best):
            continue
        if any(np.max(np.abs(shapes[i] - shapes[k])) <= DEDUP_TOLERANCE for k in kept):
            continue
        kept.append(int(i))
        if len(kept) == MAX_SOLUTIONS:
            break
    return SolutionSet(shapes[kept], residuals[kept])
