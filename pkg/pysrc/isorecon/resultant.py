# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Pair solver based on the Sylvester resultant in ``y``.

Both cubics are read as polynomials in ``y`` whose coefficients are
polynomials in ``x``. After pruning coefficients that are tiny relative to
the median magnitude, the effective ``y``-degrees select one of nine Sylvester
layouts. Each layout's determinant is expanded once, symbolically, into
integer-weighted monomials over the eight ``x``-polynomial entries, so at
solve time forming the resultant is only a few polynomial products.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
from collections import defaultdict
from functools import cache

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.typing import ArrayLike, NDArray

from .cubics import CubicPair
from .errors import DegeneratePairError
from .roots import SolutionSet, collect_solutions, real_roots, trim_leading

__all__ = (
    "NOMINAL_DEGREE",
    "PrunedPair",
    "ResultantPoly",
    "expansion_table",
    "prune_and_classify",
    "solve_pair_resultant",
    "sylvester_matrix",
    "sylvester_resultant",
)

logger = logging.getLogger(__name__)

PRUNE_FRACTION = 0.01
RESIDUAL_TOLERANCE = 1e-6

# coefficient indices (COEFFICIENT_ORDER) grouped by power of y, each group
# ordered by ascending power of x
Y_GROUPS = (
    np.array([9, 7, 4, 0]),
    np.array([8, 5, 1]),
    np.array([6, 2]),
    np.array([3]),
)

DEGREE_NAMES = {1: "Linear", 2: "Quadratic", 3: "Cubic"}

NOMINAL_DEGREE = {
    (3, 3): 9,
    (2, 3): 9,
    (1, 3): 9,
    (3, 2): 9,
    (3, 1): 9,
    (2, 2): 8,
    (2, 1): 7,
    (1, 2): 7,
    (1, 1): 5,
}

FACTOR_TAGS = {(2, 2): "5x3"}


def _y_degree(coef: NDArray[np.float64]) -> int:
    for k in (3, 2, 1, 0):
        if np.any(coef[Y_GROUPS[k]] != 0):
            return k
    return -1


def y_coefficients(coef: ArrayLike, degree: int = 3) -> list[NDArray[np.float64]]:
    """Ascending x-polynomials multiplying ``y^0 .. y^degree``."""
    c = np.asarray(coef, dtype=np.float64)
    return [c[Y_GROUPS[k]] for k in range(degree + 1)]


@dataclasses.dataclass(frozen=True)
class PrunedPair:
    a: NDArray[np.float64]
    b: NDArray[np.float64]
    deg_a: int
    deg_b: int
    th_a: float
    th_b: float

    @property
    def case(self) -> tuple[int, int]:
        return self.deg_a, self.deg_b

    @property
    def label(self) -> str:
        return f"{DEGREE_NAMES[self.deg_a]}, {DEGREE_NAMES[self.deg_b]}"


@dataclasses.dataclass(frozen=True)
class ResultantPoly:
    coefficients: NDArray[np.float64]
    nominal_degree: int
    factors: str
    case: tuple[int, int]
    degree_reduced: bool = False

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x: ArrayLike):
        return P.polyval(x, self.coefficients)


def prune_and_classify(c: CubicPair) -> PrunedPair:
    pruned = []
    thresholds = []
    degrees = []
    for name, coef in (("A", c.a), ("B", c.b)):
        th = PRUNE_FRACTION * float(np.median(np.abs(coef)))
        kept = np.where(np.abs(coef) < th, 0.0, coef)
        degree = _y_degree(kept)
        if degree <= 0:
            raise DegeneratePairError(f"cubic {name} has no y-dependence after pruning")
        pruned.append(kept)
        thresholds.append(th)
        degrees.append(degree)
    result = PrunedPair(
        a=pruned[0],
        b=pruned[1],
        deg_a=degrees[0],
        deg_b=degrees[1],
        th_a=thresholds[0],
        th_b=thresholds[1],
    )
    logger.debug("pruned pair classified as (%s)", result.label)
    return result


def sylvester_matrix(p: ArrayLike, q: ArrayLike) -> NDArray[np.float64]:
    """Numeric Sylvester matrix of two polynomials given highest power first."""
    pc = np.asarray(p, dtype=np.float64)
    qc = np.asarray(q, dtype=np.float64)
    n = len(pc) - 1
    m = len(qc) - 1
    out = np.zeros((n + m, n + m))
    for r in range(m):
        out[r, r : r + n + 1] = pc
    for r in range(n):
        out[m + r, r : r + m + 1] = qc
    return out


def _layout(n: int, m: int) -> list[list[int | None]]:
    # entry symbols: 0..3 are A's y^k coefficients, 4..7 are B's
    size = n + m
    rows: list[list[int | None]] = []
    for r in range(m):
        row: list[int | None] = [None] * size
        for k in range(n + 1):
            row[r + n - k] = k
        rows.append(row)
    for r in range(n):
        row = [None] * size
        for k in range(m + 1):
            row[r + m - k] = 4 + k
        rows.append(row)
    return rows


def _parity(perm: tuple[int, ...]) -> int:
    inversions = sum(
        1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j]
    )
    return -1 if inversions % 2 else 1


@cache
def expansion_table(n: int, m: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Leibniz expansion of the symbolic ``(n, m)`` Sylvester determinant.

    Returns ``(exponents, coefficient)`` pairs where ``exponents[k]`` is the
    power of entry symbol ``k`` (``0..3`` for A's ``y^0..y^3`` coefficients,
    ``4..7`` for B's).
    """
    rows = _layout(n, m)
    terms: dict[tuple[int, ...], int] = defaultdict(int)
    for perm in itertools.permutations(range(n + m)):
        exponents = [0] * 8
        for r, col in enumerate(perm):
            symbol = rows[r][col]
            if symbol is None:
                break
            exponents[symbol] += 1
        else:
            terms[tuple(exponents)] += _parity(perm)
    return tuple(sorted((e, c) for e, c in terms.items() if c != 0))


def sylvester_resultant(p: PrunedPair) -> ResultantPoly:
    entries = y_coefficients(p.a) + y_coefficients(p.b)
    powers: list[list[NDArray[np.float64]]] = []
    for poly in entries:
        chain = [np.ones(1)]
        for _ in range(3):
            chain.append(P.polymul(chain[-1], poly))
        powers.append(chain)

    total = np.zeros(1)
    for exponents, weight in expansion_table(p.deg_a, p.deg_b):
        term = np.array([float(weight)])
        for symbol, power in enumerate(exponents):
            if power:
                term = P.polymul(term, powers[symbol][power])
        total = P.polyadd(total, term)

    nominal = NOMINAL_DEGREE[p.case]
    coefficients = trim_leading(total[: nominal + 1])
    reduced = len(coefficients) - 1 < nominal
    if reduced:
        logger.debug(
            "resultant degree reduced from %d to %d for (%s)",
            nominal,
            len(coefficients) - 1,
            p.label,
        )
    return ResultantPoly(
        coefficients=coefficients,
        nominal_degree=nominal,
        factors=FACTOR_TAGS.get(p.case, "-"),
        case=p.case,
        degree_reduced=reduced,
    )


def _y_roots(coef: NDArray[np.float64], x: float) -> NDArray[np.float64]:
    poly = [P.polyval(x, c) for c in y_coefficients(coef)]
    return real_roots(poly, fallback=True)


def solve_pair_resultant(c: CubicPair) -> SolutionSet:
    if c.is_degenerate:
        raise DegeneratePairError("cubic pair vanishes identically")
    pruned = prune_and_classify(c)
    resultant = sylvester_resultant(pruned)
    xs = real_roots(resultant.coefficients, fallback=True)
    if not xs.size:
        raise DegeneratePairError("resultant has no roots")

    candidates = []
    for x in xs:
        ys = _y_roots(c.a, x)
        if not ys.size:
            ys = _y_roots(c.b, x)
        candidates.extend((x, y) for y in ys)
    return collect_solutions(c, candidates, tolerance=RESIDUAL_TOLERANCE, keep_best=True)
