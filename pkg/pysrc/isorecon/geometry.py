# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Camera normalization and the local shape / normal / depth relations.

A surface seen in one image is written ``P(p) = (1/beta(p)) (u, v, 1)`` with
``beta`` the inverse depth. The local shape unknowns are the scaled inverse
depth gradients ``(x, y) = grad(ln beta)``.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Mapping
from typing import Any, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateNormalError, DomainError

__all__ = (
    "CameraIntrinsics",
    "LocalShape",
    "NormalizedPoint",
    "SurfacePoint",
    "angle_between",
    "denormalize",
    "embedding_jacobian",
    "normal_from_shape",
    "normalize",
    "normals_from_shapes",
    "plane_normals",
    "surface_point",
)

POINT_BOUND = 10.0


class NormalizedPoint(NamedTuple):
    u: float
    v: float


class LocalShape(NamedTuple):
    x: float
    y: float


@dataclasses.dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    image_w: int
    image_h: int

    def __post_init__(self) -> None:
        values = (self.fx, self.fy, self.cx, self.cy)
        if not all(np.isfinite(values)):
            raise DomainError("intrinsics must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise DomainError("focal lengths must be positive")
        if self.image_w <= 0 or self.image_h <= 0:
            raise DomainError("image size must be positive")

    @property
    def matrix(self) -> NDArray[np.float64]:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
        )

    @property
    def diagonal(self) -> float:
        """Image diagonal in pixels."""
        return float(np.hypot(self.image_w, self.image_h))

    @property
    def focal(self) -> float:
        """Pixels per normalized unit, averaged over both axes."""
        return 0.5 * (self.fx + self.fy)

    def normalize(self, pixels: ArrayLike) -> NDArray[np.float64]:
        """Vectorized :func:`normalize` over an ``(..., 2)`` array."""
        px = np.asarray(pixels, dtype=np.float64)
        out = np.empty_like(px)
        out[..., 0] = (px[..., 0] - self.cx) / self.fx
        out[..., 1] = (px[..., 1] - self.cy) / self.fy
        with np.errstate(invalid="ignore"):
            outside = np.abs(out) >= POINT_BOUND
        if np.any(outside):
            count = int(outside.any(axis=-1).sum())
            raise DomainError(f"{count} points lie outside the normalized bound {POINT_BOUND:g}")
        return out

    def denormalize(self, points: ArrayLike) -> NDArray[np.float64]:
        pts = np.asarray(points, dtype=np.float64)
        out = np.empty_like(pts)
        out[..., 0] = pts[..., 0] * self.fx + self.cx
        out[..., 1] = pts[..., 1] * self.fy + self.cy
        return out

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> CameraIntrinsics:
        try:
            return cls(
                fx=float(values["fx"]),
                fy=float(values["fy"]),
                cx=float(values["cx"]),
                cy=float(values["cy"]),
                image_w=int(values["width"]),
                image_h=int(values["height"]),
            )
        except KeyError as exc:
            raise DomainError(f"intrinsics missing key {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise DomainError(f"invalid intrinsics: {exc}") from exc

    def to_mapping(self) -> dict[str, Any]:
        return {
            "cx": self.cx,
            "cy": self.cy,
            "fx": self.fx,
            "fy": self.fy,
            "height": self.image_h,
            "width": self.image_w,
        }


@dataclasses.dataclass(frozen=True)
class SurfacePoint:
    beta: float
    point: NDArray[np.float64]
    normal: NDArray[np.float64]


def _finite(*values: float) -> bool:
    return bool(np.all(np.isfinite(values)))


def normalize(pixel: ArrayLike, K: CameraIntrinsics) -> NormalizedPoint:
    px, py = np.asarray(pixel, dtype=np.float64)
    if not _finite(px, py):
        raise DomainError(f"non-finite pixel ({px}, {py})")
    u = float((px - K.cx) / K.fx)
    v = float((py - K.cy) / K.fy)
    if abs(u) >= POINT_BOUND or abs(v) >= POINT_BOUND:
        raise DomainError(f"normalized point ({u:g}, {v:g}) is outside the bound {POINT_BOUND:g}")
    return NormalizedPoint(u, v)


def denormalize(p: NormalizedPoint, K: CameraIntrinsics) -> NDArray[np.float64]:
    if not _finite(p.u, p.v):
        raise DomainError(f"non-finite point ({p.u}, {p.v})")
    return np.array([p.u * K.fx + K.cx, p.v * K.fy + K.cy])


def normal_from_shape(p: NormalizedPoint, s: LocalShape) -> NDArray[np.float64]:
    """Unit normal ``(x, y, 1 - x u - y v) / norm`` of the surface at ``p``.

    The sign of the raw vector is kept, so the normal points away from the
    camera whenever ``1 - x u - y v > 0``.
    """
    u, v = p
    x, y = s
    if not _finite(u, v, x, y):
        raise DomainError("normal_from_shape requires finite inputs")
    raw = np.array([x, y, 1.0 - x * u - y * v])
    norm = float(np.linalg.norm(raw))
    if norm < 1e-300:
        raise DegenerateNormalError(f"zero-length normal at p={tuple(p)}, s={tuple(s)}")
    return raw / norm


def normals_from_shapes(points: ArrayLike, shapes: ArrayLike) -> NDArray[np.float64]:
    """Row-wise :func:`normal_from_shape`; NaN rows propagate."""
    p = np.asarray(points, dtype=np.float64)
    s = np.asarray(shapes, dtype=np.float64)
    raw = np.stack(
        (s[..., 0], s[..., 1], 1.0 - s[..., 0] * p[..., 0] - s[..., 1] * p[..., 1]),
        axis=-1,
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        return raw / np.linalg.norm(raw, axis=-1, keepdims=True)


def embedding_jacobian(
    p: NormalizedPoint,
    beta: float,
    s: LocalShape,
) -> NDArray[np.float64]:
    """Jacobian of ``phi(p) = (1/beta) (u, v, 1)`` with respect to ``(u, v)``.

    Args:
        p: Image point in normalized coordinates.
        beta: Inverse depth at ``p``.
        s: Local shape ``(x, y) = (beta_u / beta, beta_v / beta)``.

    Returns:
        A ``(3, 2)`` array whose columns are the tangent vectors.
    """
    if not beta > 0:
        raise DomainError(f"inverse depth must be positive, got {beta}")
    u, v = p
    x, y = s
    return (1.0 / beta) * np.array(
        [[1.0 - u * x, -u * y], [-v * x, 1.0 - v * y], [-x, -y]],
    )


def surface_point(p: NormalizedPoint, beta: float, s: LocalShape) -> SurfacePoint:
    if not beta > 0:
        raise DomainError(f"inverse depth must be positive, got {beta}")
    point = np.array([p.u, p.v, 1.0]) / beta
    return SurfacePoint(beta=float(beta), point=point, normal=normal_from_shape(p, s))


def angle_between(n1: ArrayLike, n2: ArrayLike) -> NDArray[np.float64] | float:
    """Angle in degrees between normals, ignoring orientation.

    Works row-wise on ``(..., 3)`` arrays. A pair is flipped onto the same
    hemisphere before measuring, and ``atan2`` keeps small angles accurate.
    """
    a = np.asarray(n1, dtype=np.float64)
    b = np.asarray(n2, dtype=np.float64)
    dot = np.sum(a * b, axis=-1)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    angle = np.degrees(np.arctan2(cross, np.abs(dot)))
    if np.ndim(angle) == 0:
        return float(angle)
    return angle


def plane_normals(H: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]] | None:
    """The two plane normals a homography can be induced by.

    ``H`` maps normalized points of the first view to the second and is
    taken up to scale. Scaled to unit middle singular value, it preserves
    lengths on exactly two planes through the origin; their normals, in the
    first camera's frame, are the candidates. Returns ``None`` when all
    singular values coincide and the plane is undetermined.
    """
    _, sigma, vt = np.linalg.svd(np.asarray(H, dtype=np.float64))
    if not np.all(np.isfinite(sigma)) or sigma[1] <= 0.0:
        return None
    s1, s3 = (sigma[0] / sigma[1]) ** 2, (sigma[2] / sigma[1]) ** 2
    spread = s1 - s3
    if spread <= 1e-12:
        return None
    v1, v2, v3 = vt
    a = np.sqrt(max(1.0 - s3, 0.0) / spread)
    b = np.sqrt(max(s1 - 1.0, 0.0) / spread)
    n1 = np.cross(v2, a * v1 + b * v3)
    n2 = np.cross(v2, a * v1 - b * v3)
    return n1, n2
