# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""The two cubic reconstruction equations of an image pair.

For a reference point ``p1`` and the differentials of the warp carrying image
two onto the reference (evaluated at ``p2``), the shape ``s = (x, y)`` of the
reference surface satisfies two bivariate cubics ``A(s) = B(s) = 0``. They
state that the metric of the reference surface pulled back through the warp
is proportional to the metric of the second surface, whose shape follows from
``s`` by the linear transfer relation.

The equations are first written in ``z = J^T s``, where they collapse to a
handful of products of the ``e`` intermediates, then composed back to ``s``.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Mapping
from typing import Any, NamedTuple

import numpy as np
import scipy.signal
from numpy.typing import ArrayLike, NDArray

from .errors import DegeneratePairError, DomainError
from .geometry import LocalShape, NormalizedPoint
from .warp import DEGENERATE_DET, PairDifferentials

__all__ = (
    "COEFFICIENT_ORDER",
    "CubicPair",
    "EquationTerms",
    "ReducedCoefficients",
    "ShapeResidual",
    "assemble_cubics",
    "equation_terms",
    "eval_cubics",
    "local_homography",
    "polish_shape",
    "reduced_coefficients",
    "transfer_offset",
)

COEFFICIENT_ORDER = ("30", "21", "12", "03", "20", "11", "02", "10", "01", "00")
EXP_X = np.array([3, 2, 1, 0, 2, 1, 0, 1, 0, 0])
EXP_Y = np.array([0, 1, 2, 3, 0, 1, 2, 0, 1, 0])

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
DIFFERENTIAL_KEYS = ("p1", "p2", "J", "Hu", "Hv")


class EquationTerms(NamedTuple):
    t1: float
    t2: float
    e1: float
    e2: float
    e3: float
    e4: float
    e5: float
    e6: float
    e7: float
    e8: float
    e9: float
    e10: float
    e11: float
    e12: float
    e13: float
    e14: float
    e15: float
    e16: float


class ReducedCoefficients(NamedTuple):
    """Coefficients of the cubics in ``z = J^T s``.

    ``A' = (c21 z2 + c20) z1^2 + (c12 z2^2 + c11 z2 + c10) z1
    + (c02 z2^2 + c01 z2 + c00)`` and ``B' = z1 C(z2) + F(z2)`` with
    ``C = d12 z2^2 + d11 z2 + d10`` and ``F = d03 z2^3 + ... + d00``.
    """

    c21: float
    c12: float
    c20: float
    c11: float
    c02: float
    c10: float
    c01: float
    c00: float
    d12: float
    d11: float
    d10: float
    d03: float
    d02: float
    d01: float
    d00: float

    def a_grid(self) -> NDArray[np.float64]:
        g = np.zeros((4, 4))
        g[2, 1], g[2, 0] = self.c21, self.c20
        g[1, 2], g[1, 1], g[1, 0] = self.c12, self.c11, self.c10
        g[0, 2], g[0, 1], g[0, 0] = self.c02, self.c01, self.c00
        return g

    def b_grid(self) -> NDArray[np.float64]:
        g = np.zeros((4, 4))
        g[1, 2], g[1, 1], g[1, 0] = self.d12, self.d11, self.d10
        g[0, 3], g[0, 2], g[0, 1], g[0, 0] = self.d03, self.d02, self.d01, self.d00
        return g


def transfer_offset(d: PairDifferentials) -> NDArray[np.float64]:
    """Offset ``t = -[[0, 1], [1, 0]] J^-1 (h3, h4)`` of the transfer relation."""
    return -SWAP @ np.linalg.solve(d.J, np.array([d.h3, d.h4]))


def local_homography(p1: NormalizedPoint, d: PairDifferentials) -> NDArray[np.float64]:
    """Homography from the second image to the reference matching the warp at ``p2``.

    It carries ``p2`` onto ``p1`` with Jacobian ``J`` and the same ``(h3, h4)``
    Hessian entries, which are all the cubics see of the warp. Its bottom row
    is ``(t, 1 - t . p2)`` with ``t`` the transfer offset.
    """
    p = np.asarray(p1, dtype=np.float64)
    q = np.asarray(d.target, dtype=np.float64)
    t = transfer_offset(d)
    top = d.J + np.outer(p, t)
    H = np.empty((3, 3))
    H[:2, :2] = top
    H[:2, 2] = p - top @ q
    H[2, :2] = t
    H[2, 2] = 1.0 - t @ q
    return H


def equation_terms(p1: NormalizedPoint, d: PairDifferentials) -> EquationTerms:
    u1, v1 = p1
    u2, v2 = d.target
    j1, j2, j3, j4 = d.j
    t1, t2 = transfer_offset(d)
    e1 = 1.0 + u1 * u1 + v1 * v1
    e2 = 1.0 + u2 * u2 + v2 * v2
    return EquationTerms(
        t1=t1,
        t2=t2,
        e1=e1,
        e2=e2,
        e3=j1 * u1 + j2 * v1,
        e4=j3 * u1 + j4 * v1,
        e5=1.0 - 2.0 * t2 * v2 + e2 * t2 * t2,
        e6=1.0 - 2.0 * t1 * u2 + e2 * t1 * t1,
        e7=j1 * j3 + j2 * j4,
        e8=t2 * u2 + t1 * v2 - e2 * t1 * t2,
        e9=v2 - e2 * t2,
        e10=u2 - e2 * t1,
        e11=j2 * u1 + j4 * v1,
        e12=j2 * u1 - j3 * u1,
        e13=j1 * j1 + j2 * j2,
        e14=j3 * j3 + j4 * j4,
        e15=j1 * j4 + j2 * j3,
        e16=j1 * j4 - j2 * j3,
    )


def reduced_coefficients(e: EquationTerms) -> ReducedCoefficients:
    return ReducedCoefficients(
        c21=2.0 * (e.e2 * e.e4 - e.e1 * e.e9),
        c12=2.0 * (e.e1 * e.e10 - e.e2 * e.e3),
        c20=e.e1 * e.e5 - e.e2 * e.e14,
        c11=4.0 * (e.e3 * e.e9 - e.e4 * e.e10),
        c02=e.e2 * e.e13 - e.e1 * e.e6,
        c10=2.0 * (e.e10 * e.e14 - e.e3 * e.e5),
        c01=2.0 * (e.e4 * e.e6 - e.e9 * e.e13),
        c00=e.e13 * e.e5 - e.e14 * e.e6,
        d12=e.e2 * e.e4 - e.e1 * e.e9,
        d11=e.e1 * e.e5 - e.e2 * e.e14,
        d10=e.e9 * e.e14 - e.e4 * e.e5,
        d03=e.e1 * e.e10 - e.e2 * e.e3,
        d02=e.e2 * e.e7 + e.e1 * e.e8 + 2.0 * (e.e3 * e.e9 - e.e4 * e.e10),
        d01=e.e10 * e.e14 - e.e3 * e.e5 - 2.0 * (e.e7 * e.e9 + e.e4 * e.e8),
        d00=e.e5 * e.e7 + e.e8 * e.e14,
    )


def _compose(grid: NDArray[np.float64], J: NDArray[np.float64]) -> NDArray[np.float64]:
    """Substitute ``z1 = j1 x + j2 y``, ``z2 = j3 x + j4 y`` into a grid in z."""
    z1 = np.array([[0.0, J[1, 0]], [J[0, 0], 0.0]])
    z2 = np.array([[0.0, J[1, 1]], [J[0, 1], 0.0]])
    powers1 = [np.ones((1, 1))]
    powers2 = [np.ones((1, 1))]
    for _ in range(3):
        powers1.append(scipy.signal.convolve2d(powers1[-1], z1))
        powers2.append(scipy.signal.convolve2d(powers2[-1], z2))
    out = np.zeros((4, 4))
    for i, j in zip(*np.nonzero(grid)):
        term = scipy.signal.convolve2d(powers1[i], powers2[j])
        out[: term.shape[0], : term.shape[1]] += grid[i, j] * term
    return out


def _flatten(grid: NDArray[np.float64]) -> NDArray[np.float64]:
    return grid[EXP_X, EXP_Y]


class ShapeResidual(NamedTuple):
    rA: float
    rB: float


@dataclasses.dataclass(frozen=True)
class CubicPair:
    """Coefficients of ``A`` and ``B`` in ``COEFFICIENT_ORDER``.

    ``a[0]`` multiplies ``x^3``, ``a[3]`` multiplies ``y^3`` and ``a[9]`` is
    the constant term.
    """

    a: NDArray[np.float64]
    b: NDArray[np.float64]
    p1: NormalizedPoint | None = None
    diff: PairDifferentials | None = None
    terms: EquationTerms | None = None

    @classmethod
    def from_mappings(cls, a: dict[str, float], b: dict[str, float]) -> CubicPair:
        try:
            return cls(
                a=np.array([float(a[k]) for k in COEFFICIENT_ORDER]),
                b=np.array([float(b[k]) for k in COEFFICIENT_ORDER]),
            )
        except KeyError as exc:
            raise DomainError(f"missing coefficient {exc.args[0]!r}") from exc

    def to_mappings(self) -> tuple[dict[str, float], dict[str, float]]:
        return (
            {k: float(v) for k, v in zip(COEFFICIENT_ORDER, self.a)},
            {k: float(v) for k, v in zip(COEFFICIENT_ORDER, self.b)},
        )

    def to_dict(self) -> dict[str, Any]:
        """Coefficients plus, when known, the point pair and warp differentials."""
        a, b = self.to_mappings()
        out: dict[str, Any] = {"a": a, "b": b, "degenerate": self.is_degenerate}
        if self.p1 is not None and self.diff is not None:
            out["p1"] = [float(c) for c in self.p1]
            out["p2"] = [float(c) for c in self.diff.target]
            out["J"] = self.diff.J.tolist()
            out["Hu"] = self.diff.Hu.tolist()
            out["Hv"] = self.diff.Hv.tolist()
        return out

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> CubicPair:
        """Inverse of :meth:`to_dict`.

        With ``p1``, ``p2``, ``J``, ``Hu`` and ``Hv`` present the pair is
        reassembled from them, so both solvers can use it; otherwise only the
        ``a`` and ``b`` coefficients are read.
        """
        if not all(key in values for key in DIFFERENTIAL_KEYS):
            return cls.from_mappings(values["a"], values["b"])
        try:
            p1 = NormalizedPoint(*(float(c) for c in values["p1"]))
            d = PairDifferentials(
                J=np.array(values["J"], dtype=np.float64).reshape(2, 2),
                Hu=np.array(values["Hu"], dtype=np.float64).reshape(2, 2),
                Hv=np.array(values["Hv"], dtype=np.float64).reshape(2, 2),
                target=NormalizedPoint(*(float(c) for c in values["p2"])),
                warped=p1,
            )
        except (TypeError, ValueError) as exc:
            raise DomainError(f"invalid point pair or differentials: {exc}") from exc
        return assemble_cubics(p1, d)

    @property
    def p2(self) -> NormalizedPoint | None:
        return None if self.diff is None else self.diff.target

    @property
    def scale(self) -> float:
        return float(max(np.max(np.abs(self.a)), np.max(np.abs(self.b))))

    @property
    def is_degenerate(self) -> bool:
        ref = 1.0
        if self.terms is not None:
            e = self.terms
            ref = e.e1 * e.e2 * max(e.e13, e.e14, 1.0)
        tol = 1e-12 * ref
        return bool(np.max(np.abs(self.a)) <= tol or np.max(np.abs(self.b)) <= tol)

    def grid(self, which: str) -> NDArray[np.float64]:
        """Coefficients as a 4x4 array indexed by powers ``[i, j]`` of x and y."""
        coef = self.a if which == "a" else self.b
        out = np.zeros((4, 4))
        out[EXP_X, EXP_Y] = coef
        return out

    def normalized(self) -> CubicPair:
        """Copy with ``A`` and ``B`` scaled to unit maximum coefficient."""
        na = np.max(np.abs(self.a))
        nb = np.max(np.abs(self.b))
        return dataclasses.replace(
            self,
            a=self.a / na if na > 0 else self.a,
            b=self.b / nb if nb > 0 else self.b,
        )

    def evaluate(self, shapes: ArrayLike) -> NDArray[np.float64]:
        """``(A, B)`` at each row of an ``(n, 2)`` array of shapes."""
        s = np.atleast_2d(np.asarray(shapes, dtype=np.float64))
        monomials = s[:, :1] ** EXP_X * s[:, 1:2] ** EXP_Y
        return np.stack((monomials @ self.a, monomials @ self.b), axis=-1)

    def jacobian(self, s: ArrayLike) -> NDArray[np.float64]:
        """``[[A_x, A_y], [B_x, B_y]]`` at one shape."""
        x, y = np.asarray(s, dtype=np.float64)
        dx = np.where(EXP_X > 0, EXP_X * x ** np.maximum(EXP_X - 1, 0), 0.0) * y**EXP_Y
        dy = np.where(EXP_Y > 0, EXP_Y * y ** np.maximum(EXP_Y - 1, 0), 0.0) * x**EXP_X
        return np.array([[dx @ self.a, dy @ self.a], [dx @ self.b, dy @ self.b]])

    def relative_residual(self, s: ArrayLike) -> float:
        """``|A| + |B|`` relative to the size of the monomials at ``s``."""
        x, y = np.asarray(s, dtype=np.float64)
        r = self.evaluate([(x, y)])[0]
        size = self.scale * (1.0 + max(abs(x), abs(y))) ** 3
        return float(np.sum(np.abs(r)) / size) if size > 0 else float("inf")


def assemble_cubics(p1: NormalizedPoint, d: PairDifferentials) -> CubicPair:
    if abs(d.det) <= DEGENERATE_DET:
        raise DegeneratePairError(f"warp Jacobian determinant {d.det:g} is degenerate")
    terms = equation_terms(p1, d)
    reduced = reduced_coefficients(terms)
    a = _flatten(_compose(reduced.a_grid(), d.J))
    b = _flatten(_compose(reduced.b_grid(), d.J))
    return CubicPair(a=a, b=b, p1=NormalizedPoint(*p1), diff=d, terms=terms)


def eval_cubics(c: CubicPair, s: LocalShape) -> ShapeResidual:
    x, y = s
    a = c.a
    b = c.b
    # Horner in y with x-polynomial coefficients
    ra = ((a[3] * y + (a[2] * x + a[6])) * y + ((a[1] * x + a[5]) * x + a[8])) * y + (
        ((a[0] * x + a[4]) * x + a[7]) * x + a[9]
    )
    rb = ((b[3] * y + (b[2] * x + b[6])) * y + ((b[1] * x + b[5]) * x + b[8])) * y + (
        ((b[0] * x + b[4]) * x + b[7]) * x + b[9]
    )
    return ShapeResidual(float(ra), float(rb))


def polish_shape(c: CubicPair, s: ArrayLike, steps: int = 3) -> NDArray[np.float64]:
    """A few Newton steps on ``(A, B) = 0``; a step is kept only if it helps."""
    current = np.asarray(s, dtype=np.float64).copy()
    r = c.evaluate([current])[0]
    cost = float(r @ r)
    for _ in range(steps):
        if cost == 0.0:
            break
        try:
            step = np.linalg.solve(c.jacobian(current), r)
        except np.linalg.LinAlgError:
            break
        trial = current - step
        rt = c.evaluate([trial])[0]
        trial_cost = float(rt @ rt)
        if not np.isfinite(trial_cost) or trial_cost >= cost:
            break
        current, r, cost = trial, rt, trial_cost
    return current
