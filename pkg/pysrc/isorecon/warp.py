# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Smooth image-to-image warps.

A warp is a tensor-product uniform cubic B-spline with two output channels,
fitted to point correspondences by linear least squares with a bending-energy
penalty. First and second derivatives are analytic, which is what the
reconstruction equations consume.
"""

from __future__ import annotations

import dataclasses
import functools
import logging
import math
import warnings
from typing import NamedTuple

import numpy as np
import scipy.interpolate
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError, IllPosedWarpError
from .geometry import NormalizedPoint

__all__ = (
    "MIN_CORRESPONDENCES",
    "InlierRecord",
    "MadStatistics",
    "PairDifferentials",
    "Warp",
    "WarpedPoint",
    "eval_warp",
    "fit_warp",
    "mad_statistics",
    "robust_fit_mad",
    "warp_differentials",
)

logger = logging.getLogger(__name__)

MIN_CORRESPONDENCES = 16
DEGENERATE_DET = 1e-8
MAD_SCALE = 1.4826
DOMAIN_PADDING = 0.05
MAX_LAMBDA_ESCALATIONS = 3
MAX_INTERVALS = 16


def _grid_intervals(count: int) -> int:
    # at least two correspondences per coefficient and channel
    return min(max(math.isqrt(count // 2) - 3, 1), MAX_INTERVALS)


@functools.lru_cache(maxsize=256)
def _axis_spline(lo: float, hi: float, k: int) -> scipy.interpolate.BSpline:
    # identity coefficients: evaluating gives every basis function at once
    h = (hi - lo) / k
    knots = lo + h * np.arange(-3, k + 4)
    return scipy.interpolate.BSpline(knots, np.eye(k + 3), 3, extrapolate=True)


def _padded_domain(points: NDArray[np.float64]) -> tuple[float, float, float, float]:
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.maximum(hi - lo, 1e-6)
    pad = DOMAIN_PADDING * span
    return (
        float(lo[0] - pad[0]),
        float(hi[0] + pad[0]),
        float(lo[1] - pad[1]),
        float(hi[1] + pad[1]),
    )


def _design(
    domain: tuple[float, float, float, float],
    intervals: tuple[int, int],
    points: NDArray[np.float64],
    du: int = 0,
    dv: int = 0,
) -> NDArray[np.float64]:
    u0, u1, v0, v1 = domain
    ku, kv = intervals
    bu = _axis_spline(u0, u1, ku)(points[:, 0], nu=du)
    bv = _axis_spline(v0, v1, kv)(points[:, 1], nu=dv)
    return (bu[:, :, None] * bv[:, None, :]).reshape(len(points), -1)


def _bending_matrix(
    domain: tuple[float, float, float, float],
    intervals: tuple[int, int],
) -> NDArray[np.float64]:
    u0, u1, v0, v1 = domain
    ku, kv = intervals
    # two midpoint samples per interval and axis
    qu = u0 + (np.arange(2 * ku) + 0.5) * (u1 - u0) / (2 * ku)
    qv = v0 + (np.arange(2 * kv) + 0.5) * (v1 - v0) / (2 * kv)
    grid = np.stack(np.meshgrid(qu, qv, indexing="ij"), axis=-1).reshape(-1, 2)
    duu = _design(domain, intervals, grid, 2, 0)
    duv = _design(domain, intervals, grid, 1, 1)
    dvv = _design(domain, intervals, grid, 0, 2)
    area = (u1 - u0) * (v1 - v0)
    scale = area**2 / len(grid)
    return scale * (duu.T @ duu + 2.0 * duv.T @ duv + dvv.T @ dvv)


def _solve_spd(lhs: NDArray[np.float64], rhs: NDArray[np.float64]) -> NDArray[np.float64]:
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            return scipy.linalg.solve(lhs, rhs, assume_a="pos")
        except scipy.linalg.LinAlgWarning as exc:
            raise np.linalg.LinAlgError(str(exc)) from exc


class WarpedPoint(NamedTuple):
    u: float
    v: float
    extrapolated: bool


@dataclasses.dataclass(frozen=True)
class PairDifferentials:
    """First and second derivatives of a warp at one point.

    ``target`` is the point the derivatives are taken at and ``warped`` its
    image under the warp. ``J[k, a]`` is the derivative of output ``k`` with
    respect to input ``a``, so in the ``j1..j4`` naming
    ``J = [[j1, j3], [j2, j4]]``. ``Hu`` and ``Hv`` are the Hessians of the
    first and second output channel.
    """

    J: NDArray[np.float64]
    Hu: NDArray[np.float64]
    Hv: NDArray[np.float64]
    target: NormalizedPoint
    warped: NormalizedPoint | None = None

    @property
    def j(self) -> tuple[float, float, float, float]:
        J = self.J
        return float(J[0, 0]), float(J[1, 0]), float(J[0, 1]), float(J[1, 1])

    @property
    def h3(self) -> float:
        return float(self.Hu[0, 1])

    @property
    def h4(self) -> float:
        return float(self.Hv[0, 1])

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.J))

    @property
    def degenerate(self) -> bool:
        return not abs(self.det) > DEGENERATE_DET


@dataclasses.dataclass(frozen=True)
class Warp:
    coefficients: NDArray[np.float64]
    domain: tuple[float, float, float, float]
    lam: float
    residual_rms: float = 0.0

    @property
    def intervals(self) -> tuple[int, int]:
        nu, nv, _ = self.coefficients.shape
        return nu - 3, nv - 3

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        u0, u1, v0, v1 = self.domain
        return (
            (pts[:, 0] >= u0) & (pts[:, 0] <= u1) & (pts[:, 1] >= v0) & (pts[:, 1] <= v1)
        )

    def _apply(self, points: NDArray[np.float64], du: int, dv: int) -> NDArray[np.float64]:
        design = _design(self.domain, self.intervals, points, du, dv)
        return design @ self.coefficients.reshape(-1, 2)

    def evaluate(self, points: ArrayLike) -> NDArray[np.float64]:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return self._apply(pts, 0, 0)

    def derivatives(self, points: ArrayLike):
        """Values, Jacobians ``(n, 2, 2)`` and Hessians ``(n, 2, 2, 2)``.

        ``hessians[i, k]`` is the symmetric Hessian of output channel ``k``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        values = self._apply(pts, 0, 0)
        d_u = self._apply(pts, 1, 0)
        d_v = self._apply(pts, 0, 1)
        d_uu = self._apply(pts, 2, 0)
        d_uv = self._apply(pts, 1, 1)
        d_vv = self._apply(pts, 0, 2)
        jacobians = np.stack((d_u, d_v), axis=-1)
        hessians = np.stack(
            (np.stack((d_uu, d_uv), axis=-1), np.stack((d_uv, d_vv), axis=-1)),
            axis=-1,
        )
        return values, jacobians, hessians


def _as_points(values: ArrayLike, name: str) -> NDArray[np.float64]:
    pts = np.asarray(values, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError(f"{name} must have shape (n, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise DomainError(f"{name} contains non-finite values")
    return pts


def fit_warp(
    src_points: ArrayLike,
    dst_points: ArrayLike,
    weights: ArrayLike | None = None,
    lam: float = 1e-3,
    *,
    intervals: int | None = None,
    domain: tuple[float, float, float, float] | None = None,
) -> Warp:
    """Fit a warp carrying ``src_points`` onto ``dst_points``.

    Minimizes ``sum_i w_i |eta(p_i) - q_i|^2 + lam * R(eta)`` where ``R`` is the
    bending energy averaged over a quadrature grid and scaled by the squared
    domain area, so ``lam`` is dimensionless. A singular normal system is
    retried with ``lam`` raised tenfold, at most three times.
    """
    src = _as_points(src_points, "src_points")
    dst = _as_points(dst_points, "dst_points")
    if len(src) != len(dst):
        raise DomainError("src_points and dst_points differ in length")
    if len(src) < MIN_CORRESPONDENCES:
        raise DomainError(
            f"a warp needs at least {MIN_CORRESPONDENCES} correspondences, got {len(src)}",
        )
    if not lam > 0:
        raise DomainError(f"lam must be positive, got {lam}")
    w = np.ones(len(src)) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (len(src),) or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("weights must be finite, non-negative and one per point")

    if domain is None:
        domain = _padded_domain(src)
    k = intervals or _grid_intervals(len(src))
    grid = (k, k)
    design = _design(domain, grid, src)
    weighted = design * w[:, None]
    normal = design.T @ weighted
    rhs = weighted.T @ dst
    bending = _bending_matrix(domain, grid)

    current = lam
    for attempt in range(MAX_LAMBDA_ESCALATIONS + 1):
        try:
            coef = _solve_spd(normal + current * bending, rhs)
            break
        except np.linalg.LinAlgError:
            if attempt == MAX_LAMBDA_ESCALATIONS:
                raise IllPosedWarpError(
                    f"warp normal system singular up to lam={current:g}",
                ) from None
            logger.debug("singular warp system at lam=%g, escalating", current)
            current *= 10.0

    residual = design @ coef - dst
    rms = float(np.sqrt(np.mean(np.sum(residual**2, axis=1))))
    return Warp(
        coefficients=coef.reshape(k + 3, k + 3, 2),
        domain=domain,
        lam=current,
        residual_rms=rms,
    )


def eval_warp(w: Warp, p: NormalizedPoint) -> WarpedPoint:
    inside = bool(w.contains([p])[0])
    if not inside:
        logger.debug("warp evaluated outside its domain at (%g, %g)", p[0], p[1])
    u, v = w.evaluate([p])[0]
    return WarpedPoint(float(u), float(v), not inside)


def warp_differentials(w: Warp, p: NormalizedPoint) -> PairDifferentials:
    values, jacobians, hessians = w.derivatives([p])
    diff = PairDifferentials(
        J=jacobians[0],
        Hu=hessians[0, 0],
        Hv=hessians[0, 1],
        target=NormalizedPoint(float(p[0]), float(p[1])),
        warped=NormalizedPoint(float(values[0, 0]), float(values[0, 1])),
    )
    if diff.degenerate:
        logger.debug("degenerate warp Jacobian at (%g, %g)", p[0], p[1])
    return diff


class MadStatistics(NamedTuple):
    median: float
    mad: float
    sigma_hat: float
    threshold: float

    def flag(self, discrepancies: ArrayLike) -> NDArray[np.intp]:
        """Indices strictly below the threshold."""
        d = np.asarray(discrepancies, dtype=np.float64)
        # an exact fit has sigma 0 and keeps the exact correspondences
        threshold = max(self.threshold, np.finfo(np.float64).tiny)
        return np.flatnonzero(d < threshold)


def mad_statistics(discrepancies: ArrayLike) -> MadStatistics:
    """Robust scale of a discrepancy sample: ``sigma = 1.4826 * MAD``."""
    d = np.asarray(discrepancies, dtype=np.float64)
    median = float(np.median(d))
    mad = float(np.median(np.abs(d - median)))
    sigma = MAD_SCALE * mad
    return MadStatistics(median, mad, sigma, 3.0 * sigma)


@dataclasses.dataclass(frozen=True)
class InlierRecord:
    inliers: NDArray[np.intp]
    sigma_hat: float
    threshold: float
    discrepancies: NDArray[np.float64]
    iterations: int
    converged: bool
    shrunk: bool = False

    @property
    def mask(self) -> NDArray[np.bool_]:
        out = np.zeros(len(self.discrepancies), dtype=bool)
        out[self.inliers] = True
        return out


def _discrepancy(w: Warp, src: NDArray[np.float64], dst: NDArray[np.float64]):
    return np.sum(np.abs(w.evaluate(src) - dst), axis=1)


def robust_fit_mad(
    src_points: ArrayLike,
    dst_points: ArrayLike,
    lam: float = 1e-3,
    delta: float = 1e-3,
    *,
    max_iterations: int = 50,
) -> tuple[Warp, InlierRecord]:
    """Fit a warp while flagging mismatched correspondences.

    Each round measures the L1 transfer discrepancy of every correspondence,
    flags those strictly below ``3 sigma`` (``sigma = 1.4826 MAD`` over all of
    them), refits on the flagged set and re-estimates ``sigma`` there. The
    loop stops once two consecutive estimates differ by less than ``delta``.
    Discrepancies, ``sigma`` and ``delta`` share the units of the input
    points. The control grid is sized once from all correspondences.
    """
    src = _as_points(src_points, "src_points")
    dst = _as_points(dst_points, "dst_points")
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    if len(src) < MIN_CORRESPONDENCES:
        raise DomainError(
            f"a warp needs at least {MIN_CORRESPONDENCES} correspondences, got {len(src)}",
        )
    domain = _padded_domain(src)
    fit = functools.partial(fit_warp, lam=lam, intervals=_grid_intervals(len(src)), domain=domain)
    warp = fit(src, dst)
    inliers = np.arange(len(src))

    best: tuple[float, Warp, NDArray[np.intp]] | None = None
    converged = False
    shrunk = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):  # noqa: B007
        d = _discrepancy(warp, src, dst)
        stats = mad_statistics(d)
        flagged = stats.flag(d)
        if len(flagged) < MIN_CORRESPONDENCES:
            logger.warning(
                "inlier set shrank to %d correspondences, keeping previous warp",
                len(flagged),
            )
            shrunk = True
            break
        warp = fit(src[flagged], dst[flagged])
        inliers = flagged
        refit = mad_statistics(_discrepancy(warp, src[flagged], dst[flagged]))
        if best is None or refit.sigma_hat < best[0]:
            best = (refit.sigma_hat, warp, inliers)
        if abs(stats.sigma_hat - refit.sigma_hat) < delta:
            converged = True
            break
    else:
        if best is not None:
            logger.info("MAD loop did not settle, keeping the best iterate")
            _, warp, inliers = best

    d = _discrepancy(warp, src, dst)
    final = mad_statistics(d[inliers])
    logger.debug(
        "MAD loop: %d/%d inliers after %d iterations, sigma=%g",
        len(inliers),
        len(src),
        iterations,
        final.sigma_hat,
    )
    record = InlierRecord(
        inliers=inliers,
        sigma_hat=final.sigma_hat,
        threshold=final.threshold,
        discrepancies=d,
        iterations=iterations,
        converged=converged,
        shrunk=shrunk,
    )
    return warp, record
