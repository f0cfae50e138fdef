# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Pair solver working in the substituted variables ``z = J^T s``.

In ``z`` the second cubic is linear in ``z1``: ``B' = z1 C(z2) + F(z2)``.
Where ``C(z2) != 0``, eliminating ``z1`` turns ``A'`` into a univariate
polynomial of degree six in ``z2``. Where ``C(z2) = 0``, ``F(z2) = 0`` is a
cubic and ``A'`` a quadratic in ``z1``. Both branches always run.

The sextic carries a real quadratic factor: the cubics only see the warp
through a local homography, and both planes that homography can be induced
by solve them. Their ``z2`` values are the roots of the factor, which is
deflated before the remaining quartic is solved.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.typing import NDArray

from .cubics import (
    CubicPair,
    EquationTerms,
    ReducedCoefficients,
    local_homography,
    reduced_coefficients,
)
from .errors import DegeneratePairError, DomainError, NoRealSolutionError
from .geometry import plane_normals
from .roots import SolutionSet, collect_solutions, real_roots, trim_leading

__all__ = (
    "SubstitutionSystem",
    "build_substitution",
    "factor_sextic",
    "s_terms",
    "solve_c_nonzero",
    "solve_c_zero",
    "solve_pair_substitution",
)

logger = logging.getLogger(__name__)

DEFLATION_TOLERANCE = 1e-7
HUGE_FACTOR_ROOT = 1e6
C_ZERO_TOLERANCE = 1e-10
RESIDUAL_TOLERANCE = 1e-6


def s_terms(e: EquationTerms) -> tuple[float, ...]:
    """``s1..s16`` as tabulated for the factored sextic (``s_terms[i - 1]``).

    Kept for inspection only. The tabulated quadratic ``s16 z2^2 + s15 z2 + s14``
    does not divide :meth:`SubstitutionSystem.sextic`; the solver takes the
    factor from :meth:`SubstitutionSystem.plane_roots` instead.
    """
    s1 = 2.0 * e.e2 * e.e11 - 2.0 * e.e1 * e.e9
    s5 = e.e2 * e.e14 - e.e1 * e.e5
    s8 = 2.0 * e.e3 * e.e5 - 2.0 * e.e14 * e.e10
    s9 = 4.0 * e.e10 * e.e11 - 4.0 * e.e3 * e.e9
    s10 = 2.0 * e.e2 * e.e3 - 2.0 * e.e1 * e.e10
    s11 = e.e4 * e.e5 - 2.0 * e.e14 * e.e9
    s12 = e.e14 * e.e2 - e.e1 * e.e5 + 2.0 * e.e9 * e.e12
    s13 = e.e2 * e.e11 - e.e1 * e.e9 + e.e2 * e.e12
    s14 = e.e13 * e.e5 - e.e14 * e.e6
    s15 = 2.0 * e.e11 * e.e6 - e.e9 * e.e13
    s16 = e.e2 * e.e13 - e.e1 * e.e6
    s2 = s10 * s11 + s9 * s12 - s13 * s8
    s3 = s8 * s12 + s9 * s11
    s4 = s9 * s13 - s10 * s12
    s6 = s12 * s12 - 2.0 * s11 * s13
    s7 = s15 * s15 + 2.0 * s14 * s16
    return (s1, s2, s3, s4, s5, s6, s7, s8, s9, s10, s11, s12, s13, s14, s15, s16)


@dataclasses.dataclass(frozen=True)
class SubstitutionSystem:
    reduced: ReducedCoefficients
    s_terms: tuple[float, ...]
    J: NDArray[np.float64]
    p1: NDArray[np.float64]
    homography: NDArray[np.float64]

    @property
    def c(self) -> dict[str, float]:
        return {k: v for k, v in self.reduced._asdict().items() if k.startswith("c")}

    @property
    def d(self) -> dict[str, float]:
        return {k: v for k, v in self.reduced._asdict().items() if k.startswith("d")}

    # ascending polynomials in z2
    @property
    def C(self) -> NDArray[np.float64]:
        r = self.reduced
        return np.array([r.d10, r.d11, r.d12])

    @property
    def F(self) -> NDArray[np.float64]:
        r = self.reduced
        return np.array([r.d00, r.d01, r.d02, r.d03])

    def a_polys(self):
        """``A'`` as ``(a2, a1, a0)``, the z2-polynomials multiplying ``z1^2, z1, 1``."""
        r = self.reduced
        return (
            np.array([r.c20, r.c21]),
            np.array([r.c10, r.c11, r.c12]),
            np.array([r.c00, r.c01, r.c02]),
        )

    def plane_roots(self) -> NDArray[np.float64] | None:
        """``z2`` of the two plane solutions of the local homography."""
        try:
            normals = plane_normals(np.linalg.inv(self.homography))
        except np.linalg.LinAlgError:
            return None
        if normals is None:
            return None
        q = np.append(self.p1, 1.0)
        roots = []
        for n in normals:
            depth = float(n @ q)
            if abs(depth) <= 1e-12 * float(np.linalg.norm(n)):
                return None
            roots.append(float((self.J.T @ (n[:2] / depth))[1]))
        return np.array(roots)

    def quadratic(self) -> NDArray[np.float64] | None:
        """The monic factor ``D`` of the sextic, ascending, or ``None``."""
        roots = self.plane_roots()
        if roots is None or not np.all(np.abs(roots) <= HUGE_FACTOR_ROOT):
            return None
        return P.polyfromroots(roots)

    def sextic(self) -> NDArray[np.float64]:
        """``A'' = a2 F^2 - a1 F C + a0 C^2``, i.e. ``C^2 A'(-F/C, z2)``."""
        a2, a1, a0 = self.a_polys()
        F, C = self.F, self.C
        poly = P.polysub(
            P.polyadd(P.polymul(a2, P.polymul(F, F)), P.polymul(a0, P.polymul(C, C))),
            P.polymul(a1, P.polymul(F, C)),
        )
        # the z2^7 terms cancel identically
        return trim_leading(poly[:7])

    def reduced_residual(self, z1: float, z2: float) -> float:
        a2, a1, a0 = self.a_polys()
        ra = P.polyval(z2, a2) * z1 * z1 + P.polyval(z2, a1) * z1 + P.polyval(z2, a0)
        rb = z1 * P.polyval(z2, self.C) + P.polyval(z2, self.F)
        return float(abs(ra) + abs(rb))

    def to_shape(self, z1: float, z2: float) -> NDArray[np.float64]:
        return np.linalg.solve(self.J.T, np.array([z1, z2]))

    def _solutions(self, zs: list[tuple[float, float]]) -> SolutionSet:
        if not zs:
            return SolutionSet.empty()
        shapes = np.array([self.to_shape(z1, z2) for z1, z2 in zs])
        residuals = np.array([self.reduced_residual(z1, z2) for z1, z2 in zs])
        order = np.argsort(residuals, kind="stable")
        return SolutionSet(shapes[order], residuals[order])


def build_substitution(c: CubicPair) -> SubstitutionSystem:
    if c.terms is None or c.diff is None or c.p1 is None:
        raise DomainError("substitution needs a pair assembled from warp differentials")
    return SubstitutionSystem(
        reduced=reduced_coefficients(c.terms),
        s_terms=s_terms(c.terms),
        J=np.array(c.diff.J, dtype=np.float64),
        p1=np.asarray(c.p1, dtype=np.float64),
        homography=local_homography(c.p1, c.diff),
    )


def factor_sextic(
    sys: SubstitutionSystem,
) -> tuple[NDArray[np.float64], NDArray[np.float64]] | None:
    """Split the sextic into its plane roots and the remaining quartic.

    Returns ``None`` when the local homography does not single out two planes
    or when they do not solve the sextic to ``DEFLATION_TOLERANCE``.
    """
    sextic = sys.sextic()
    D = sys.quadratic()
    if D is None or sextic.size <= D.size:
        return None
    roots = sys.plane_roots()
    assert roots is not None
    powers = np.abs(roots)[:, None] ** np.arange(sextic.size)
    size = powers @ np.abs(sextic)
    values = np.abs(P.polyval(roots, sextic))
    if np.any(values > DEFLATION_TOLERANCE * size):
        logger.debug("plane roots leave sextic residuals %s", values / size)
        return None
    quotient, _ = P.polydiv(sextic, D)
    return roots, quotient


def _sextic_roots(sys: SubstitutionSystem) -> NDArray[np.float64]:
    factored = factor_sextic(sys)
    if factored is None:
        logger.debug("no quadratic factor, solving the sextic whole")
        return real_roots(sys.sextic())
    roots, quartic = factored
    return np.concatenate((roots, real_roots(quartic)))


def solve_c_nonzero(sys: SubstitutionSystem) -> SolutionSet:
    scale = max(abs(v) for v in sys.d.values())
    zs = []
    for z2 in _sextic_roots(sys):
        cz = P.polyval(z2, sys.C)
        if abs(cz) <= C_ZERO_TOLERANCE * scale:
            continue
        zs.append((float(-P.polyval(z2, sys.F) / cz), float(z2)))
    return sys._solutions(zs)


def solve_c_zero(sys: SubstitutionSystem) -> SolutionSet:
    a2, a1, a0 = sys.a_polys()
    zs = []
    for z2 in real_roots(sys.F):
        quadratic = [P.polyval(z2, a0), P.polyval(z2, a1), P.polyval(z2, a2)]
        zs.extend((float(z1), float(z2)) for z1 in real_roots(quadratic))
    return sys._solutions(zs)


def solve_pair_substitution(c: CubicPair) -> SolutionSet:
    if c.is_degenerate:
        raise DegeneratePairError("cubic pair vanishes identically")
    sys = build_substitution(c)
    candidates = [*solve_c_nonzero(sys).shapes, *solve_c_zero(sys).shapes]
    solutions = collect_solutions(c, candidates, tolerance=RESIDUAL_TOLERANCE)
    if not len(solutions):
        raise NoRealSolutionError("no real root survived substitution")
    return solutions
