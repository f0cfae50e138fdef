# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Synthetic benchmark scenes.

A flat rectangular sheet is bent onto a cylinder section whose radius varies
smoothly over the sequence, moved rigidly in front of a 1920x1080 camera and
projected. Bending a developable sheet preserves arc length, so every image
shows an isometric deformation of the same surface. With ``bend=False`` the
sheet stays planar and each pair of images is related by a homography, for
which the reconstruction equations hold exactly.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.transform import Rotation, Slerp

from .cubics import CubicPair, assemble_cubics
from .errors import DomainError
from .geometry import CameraIntrinsics, LocalShape, NormalizedPoint
from .warp import PairDifferentials

__all__ = (
    "DEFAULT_INTRINSICS",
    "CorrespondenceSet",
    "CylinderParams",
    "SyntheticScene",
    "generate_cylinder",
    "homography_differentials",
    "homography_transfer",
    "random_planar_pair",
)

logger = logging.getLogger(__name__)

DEFAULT_INTRINSICS = CameraIntrinsics(
    fx=1600.0,
    fy=1600.0,
    cx=960.0,
    cy=540.0,
    image_w=1920,
    image_h=1080,
)

MIN_VISIBLE = 3


@dataclasses.dataclass(frozen=True)
class CylinderParams:
    n_images: int = 7
    n_points: int = 400
    length: float = 0.20
    width: float = 0.20
    radius_range: tuple[float, float] = (0.12, 0.40)
    bend: bool = True
    depth: float = 0.45
    max_rotation_deg: float = 15.0
    noise_px: float = 1.0
    error_fraction: float = 0.0
    error_magnitude: tuple[float, float] = (100.0, 100.0)
    missing_fraction: float = 0.0
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS

    def __post_init__(self) -> None:
        if self.n_images < 3:
            raise DomainError("a scene needs at least 3 images")
        if self.n_points < 16:
            raise DomainError("a scene needs at least 16 points")
        if not 0 <= self.error_fraction <= 1 or not 0 <= self.missing_fraction < 1:
            raise DomainError("fractions must lie in [0, 1]")
        lo, hi = self.error_magnitude
        if lo < 0 or hi < lo:
            raise DomainError("error magnitude range must satisfy 0 <= lo <= hi")
        rlo, rhi = self.radius_range
        if rlo <= 0 or rhi < rlo:
            raise DomainError("radius range must satisfy 0 < lo <= hi")


@dataclasses.dataclass(frozen=True)
class CorrespondenceSet:
    """Pixel observations ``pixels[i, j]`` of track ``j`` in image ``i``."""

    pixels: NDArray[np.float64]
    visible: NDArray[np.bool_]
    intrinsics: CameraIntrinsics

    def __post_init__(self) -> None:
        if self.pixels.shape[:2] != self.visible.shape or self.pixels.shape[-1] != 2:
            raise DomainError("pixels must be (images, tracks, 2) matching visibility")
        if not np.all(np.isfinite(self.pixels[self.visible])):
            raise DomainError("visible observations must be finite")

    @property
    def n_images(self) -> int:
        return self.visible.shape[0]

    @property
    def n_tracks(self) -> int:
        return self.visible.shape[1]

    def normalized(self) -> NDArray[np.float64]:
        out = self.intrinsics.normalize(self.pixels)
        out[~self.visible] = np.nan
        return out


@dataclasses.dataclass(frozen=True)
class SyntheticScene:
    params: CylinderParams
    seed: int
    sheet: NDArray[np.float64]
    points3d: NDArray[np.float64]
    normals: NDArray[np.float64]
    shapes: NDArray[np.float64]
    corrupted: NDArray[np.bool_]
    visible: NDArray[np.bool_]
    rotations: NDArray[np.float64]
    translations: NDArray[np.float64]
    curvatures: NDArray[np.float64]

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return self.params.intrinsics

    def plane_homography(self, k: int, t: int) -> NDArray[np.float64]:
        """Homography in normalized coordinates carrying image ``k`` onto ``t``.

        Only meaningful for unbent scenes.
        """
        if np.any(self.curvatures != 0):
            raise DomainError("plane homographies need an unbent scene")
        Rk, Rt = self.rotations[k], self.rotations[t]
        tk, tt = self.translations[k], self.translations[t]
        R = Rt @ Rk.T
        T = tt - R @ tk
        n = Rk[:, 2]
        d = float(n @ tk)
        return R + np.outer(T, n) / d


def _bend(sheet: NDArray[np.float64], kappa: float):
    a = sheet[:, 0]
    b = sheet[:, 1]
    if kappa == 0:
        points = np.column_stack((a, b, np.zeros_like(a)))
        normals = np.tile([0.0, 0.0, 1.0], (len(a), 1))
        return points, normals
    angle = kappa * a
    points = np.column_stack((np.sin(angle) / kappa, b, (1.0 - np.cos(angle)) / kappa))
    normals = np.column_stack((-np.sin(angle), np.zeros_like(a), np.cos(angle)))
    return points, normals


def _shapes(normalized: NDArray[np.float64], normals: NDArray[np.float64]):
    q = np.column_stack((normalized, np.ones(len(normalized))))
    nq = np.sum(normals * q, axis=1)
    return normals[:, :2] / nq[:, None]


def generate_cylinder(
    params: CylinderParams | None = None,
    seed: int = 0,
) -> tuple[SyntheticScene, CorrespondenceSet]:
    params = params or CylinderParams()
    rng = np.random.default_rng(seed)
    K = params.intrinsics
    n_img, n_pts = params.n_images, params.n_points

    sheet = np.column_stack(
        (
            rng.uniform(-0.5, 0.5, n_pts) * params.length,
            rng.uniform(-0.5, 0.5, n_pts) * params.width,
        ),
    )

    steps = np.linspace(0.0, 1.0, n_img)
    if params.bend:
        lo, hi = 1.0 / params.radius_range[1], 1.0 / params.radius_range[0]
        k0, k1 = rng.uniform(lo, hi, 2)
        curvatures = k0 + (k1 - k0) * steps
    else:
        curvatures = np.zeros(n_img)
    limit = np.radians(params.max_rotation_deg)
    ends = Rotation.from_rotvec(rng.uniform(-limit, limit, (2, 3)))
    rotations = Slerp([0.0, 1.0], ends)(steps).as_matrix()
    shift = rng.uniform(-0.02, 0.02, (2, 3))
    translations = (
        shift[0] + (shift[1] - shift[0]) * steps[:, None] + np.array([0.0, 0.0, params.depth])
    )

    points3d = np.empty((n_img, n_pts, 3))
    normals = np.empty((n_img, n_pts, 3))
    shapes = np.empty((n_img, n_pts, 2))
    clean = np.empty((n_img, n_pts, 2))
    for i in range(n_img):
        local, local_normals = _bend(sheet, float(curvatures[i]))
        X = local @ rotations[i].T + translations[i]
        if np.any(X[:, 2] <= 0):
            raise DomainError("generated surface crosses the camera plane")
        n = local_normals @ rotations[i].T
        uv = X[:, :2] / X[:, 2:3]
        points3d[i] = X
        normals[i] = n
        shapes[i] = _shapes(uv, n)
        clean[i] = K.denormalize(uv)

    pixels = clean + rng.normal(0.0, params.noise_px, clean.shape)

    visible = rng.random((n_img, n_pts)) >= params.missing_fraction
    for j in np.flatnonzero(visible.sum(axis=0) < MIN_VISIBLE):
        hidden = np.flatnonzero(~visible[:, j])
        need = MIN_VISIBLE - int(visible[:, j].sum())
        visible[rng.choice(hidden, size=need, replace=False), j] = True

    corrupted = np.zeros((n_img, n_pts), dtype=bool)
    candidates = np.flatnonzero(visible.reshape(-1))
    count = int(np.floor(params.error_fraction * len(candidates)))
    if count:
        chosen = rng.choice(candidates, size=count, replace=False)
        corrupted.reshape(-1)[chosen] = True
        lo, hi = params.error_magnitude
        angle = rng.uniform(0.0, 2.0 * np.pi, count)
        length = rng.uniform(lo, hi, count)
        offset = np.column_stack((np.cos(angle), np.sin(angle))) * length[:, None]
        flat = pixels.reshape(-1, 2)
        flat[chosen] += offset
    pixels[~visible] = np.nan
    logger.info(
        "generated %d images x %d tracks, %d corrupted observations",
        n_img,
        n_pts,
        count,
    )

    scene = SyntheticScene(
        params=params,
        seed=seed,
        sheet=sheet,
        points3d=points3d,
        normals=normals,
        shapes=shapes,
        corrupted=corrupted,
        visible=visible,
        rotations=rotations,
        translations=translations,
        curvatures=curvatures,
    )
    return scene, CorrespondenceSet(pixels=pixels, visible=visible, intrinsics=K)


def homography_transfer(H: ArrayLike, points: ArrayLike) -> NDArray[np.float64]:
    Hm = np.asarray(H, dtype=np.float64)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    q = np.column_stack((pts, np.ones(len(pts)))) @ Hm.T
    return q[:, :2] / q[:, 2:3]


def homography_differentials(H: ArrayLike, p: NormalizedPoint) -> PairDifferentials:
    """Exact warp differentials of a homography at ``p``."""
    Hm = np.asarray(H, dtype=np.float64)
    q = np.array([p[0], p[1], 1.0])
    w = float(Hm[2] @ q)
    eta = (Hm[:2] @ q) / w
    J = (Hm[:2, :2] - np.outer(eta, Hm[2, :2])) / w
    hessians = -(J[:, :, None] * Hm[2, None, None, :2] + J[:, None, :] * Hm[2, None, :2, None]) / w
    return PairDifferentials(
        J=J,
        Hu=hessians[0],
        Hv=hessians[1],
        target=NormalizedPoint(float(p[0]), float(p[1])),
        warped=NormalizedPoint(float(eta[0]), float(eta[1])),
    )


def random_planar_pair(
    rng: np.random.Generator | int | None = None,
    *,
    max_angle: float = 0.3,
    baseline: float = 0.1,
    spread: float = 0.3,
) -> tuple[CubicPair, LocalShape]:
    """Cubic pair of a random plane seen by two cameras, with its exact root.

    The plane is placed in the second camera's frame and moved rigidly into
    the reference camera's frame, so the warp is a homography and the
    returned reference shape solves both cubics exactly.
    """
    gen = np.random.default_rng(rng)
    R = Rotation.from_rotvec(gen.uniform(-max_angle, max_angle, 3)).as_matrix()
    T = gen.uniform(-baseline, baseline, 3)
    n = np.array([gen.uniform(-0.5, 0.5), gen.uniform(-0.5, 0.5), 1.0])
    n /= np.linalg.norm(n)
    depth = gen.uniform(0.5, 1.5)
    H = R + np.outer(T, n) / depth
    p2 = gen.uniform(-spread, spread, 2)
    diff = homography_differentials(H, NormalizedPoint(float(p2[0]), float(p2[1])))
    assert diff.warped is not None
    p1 = diff.warped
    n_ref = R @ n
    nq = float(n_ref @ np.array([p1.u, p1.v, 1.0]))
    shape = LocalShape(float(n_ref[0] / nq), float(n_ref[1] / nq))
    return assemble_cubics(p1, diff), shape
