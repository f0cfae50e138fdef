# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import isorecon
from isorecon.geometry import (
    angle_between,
    denormalize,
    normalize,
    normals_from_shapes,
    plane_normals,
    surface_point,
)

K = isorecon.CameraIntrinsics(
    fx=1600.0,
    fy=1500.0,
    cx=960.0,
    cy=540.0,
    image_w=1920,
    image_h=1080,
)


class TestIntrinsics:
    def test_normalize_denormalize(self):
        """
        normalize() and denormalize() are inverse
        """
        p = normalize((1200.0, 300.0), K)
        assert p == isorecon.NormalizedPoint(0.15, -0.16)
        np.testing.assert_allclose(denormalize(p, K), (1200.0, 300.0))

    def test_normalize_vectorized(self):
        """
        CameraIntrinsics.normalize() matches normalize() row-wise
        """
        pixels = np.array([[0.0, 0.0], [1920.0, 1080.0], [960.0, 540.0]])
        out = K.normalize(pixels)
        for row, px in zip(out, pixels):
            assert tuple(row) == pytest.approx(tuple(normalize(px, K)))

    def test_normalize_bound(self):
        """
        Points farther than the normalized bound from the principal point are rejected
        """
        with pytest.raises(isorecon.DomainError, match="outside"):
            normalize((960.0 + 1600.0 * 10.0, 540.0), K)
        with pytest.raises(isorecon.DomainError, match="1 points"):
            K.normalize([[np.nan, np.nan], [960.0, 540.0 - 1500.0 * 12.0]])
        out = K.normalize([[np.nan, np.nan], [960.0 + 1600.0 * 9.9, 540.0]])
        assert np.isnan(out[0]).all()
        assert out[1, 0] == pytest.approx(9.9)

    def test_normalize_non_finite(self):
        """
        normalize() rejects non-finite pixels
        """
        with pytest.raises(isorecon.DomainError):
            normalize((np.nan, 1.0), K)

    def test_invalid(self):
        """
        CameraIntrinsics rejects non-positive focal lengths and image sizes
        """
        with pytest.raises(isorecon.DomainError):
            isorecon.CameraIntrinsics(0.0, 1.0, 0.0, 0.0, 10, 10)
        with pytest.raises(isorecon.DomainError):
            isorecon.CameraIntrinsics(1.0, 1.0, 0.0, 0.0, 10, 0)

    def test_mapping(self):
        """
        from_mapping() reads the keys to_mapping() writes
        """
        assert isorecon.CameraIntrinsics.from_mapping(K.to_mapping()) == K

    def test_mapping_missing_key(self):
        """
        from_mapping() names a missing key
        """
        values = K.to_mapping()
        del values["cy"]
        with pytest.raises(isorecon.DomainError, match="cy"):
            isorecon.CameraIntrinsics.from_mapping(values)

    def test_diagonal_focal(self):
        assert K.diagonal == pytest.approx(np.hypot(1920, 1080))
        assert K.focal == 1550.0


class TestNormal:
    def test_fronto_parallel(self):
        """
        A zero shape gives the optical axis at the image centre
        """
        p = isorecon.NormalizedPoint(0.0, 0.0)
        n = isorecon.normal_from_shape(p, isorecon.LocalShape(0.0, 0.0))
        np.testing.assert_allclose(n, (0.0, 0.0, 1.0))

    def test_unit_length(self):
        """
        normal_from_shape() returns unit vectors
        """
        rng = np.random.default_rng(0)
        for u, v, x, y in rng.uniform(-1.0, 1.0, (20, 4)):
            p = isorecon.NormalizedPoint(u, v)
            n = isorecon.normal_from_shape(p, isorecon.LocalShape(x, y))
            assert np.linalg.norm(n) == pytest.approx(1.0)

    def test_plane(self):
        """
        The shape of a plane n.X = d gives back its normal
        """
        normal = np.array([0.3, -0.2, 0.9])
        normal /= np.linalg.norm(normal)
        q = np.array([0.1, 0.2, 1.0])
        shape = isorecon.LocalShape(*(normal[:2] / (normal @ q)))
        n = isorecon.normal_from_shape(isorecon.NormalizedPoint(*q[:2]), shape)
        np.testing.assert_allclose(n, normal)

    def test_non_finite(self):
        """
        normal_from_shape() rejects non-finite input
        """
        with pytest.raises(isorecon.DomainError):
            isorecon.normal_from_shape(
                isorecon.NormalizedPoint(0.1, 0.1),
                isorecon.LocalShape(np.nan, 0.0),
            )

    def test_rows(self):
        """
        normals_from_shapes() agrees with normal_from_shape() and keeps NaN rows
        """
        points = np.array([[0.1, 0.2], [np.nan, np.nan], [-0.3, 0.0]])
        shapes = np.array([[0.5, -1.0], [0.0, 0.0], [2.0, 0.1]])
        out = normals_from_shapes(points, shapes)
        assert np.isnan(out[1]).all()
        for i in (0, 2):
            expected = isorecon.normal_from_shape(
                isorecon.NormalizedPoint(*points[i]),
                isorecon.LocalShape(*shapes[i]),
            )
            np.testing.assert_allclose(out[i], expected)


class TestEmbedding:
    def test_jacobian_finite_difference(self):
        """
        embedding_jacobian() matches finite differences of (u, v, 1) / beta
        """
        p0 = np.array([0.12, -0.07])
        shape = np.array([0.8, -0.4])
        beta0 = 2.5

        def phi(p):
            beta = beta0 * np.exp(shape @ (p - p0))
            return np.array([p[0], p[1], 1.0]) / beta

        h = 1e-6
        numeric = np.column_stack(
            [(phi(p0 + h * e) - phi(p0 - h * e)) / (2 * h) for e in np.eye(2)],
        )
        J = isorecon.embedding_jacobian(
            isorecon.NormalizedPoint(*p0),
            beta0,
            isorecon.LocalShape(*shape),
        )
        np.testing.assert_allclose(J, numeric, rtol=1e-6, atol=1e-9)

    def test_tangent_orthogonal_to_normal(self):
        """
        Both tangent vectors are orthogonal to the surface normal
        """
        p = isorecon.NormalizedPoint(0.3, -0.1)
        s = isorecon.LocalShape(-1.2, 0.7)
        J = isorecon.embedding_jacobian(p, 1.7, s)
        n = isorecon.normal_from_shape(p, s)
        np.testing.assert_allclose(n @ J, (0.0, 0.0), atol=1e-12)

    def test_non_positive_depth(self):
        """
        embedding_jacobian() and surface_point() need positive inverse depth
        """
        p = isorecon.NormalizedPoint(0.0, 0.0)
        s = isorecon.LocalShape(0.0, 0.0)
        with pytest.raises(isorecon.DomainError):
            isorecon.embedding_jacobian(p, 0.0, s)
        with pytest.raises(isorecon.DomainError):
            surface_point(p, -1.0, s)

    def test_surface_point(self):
        p = isorecon.NormalizedPoint(0.2, 0.4)
        point = surface_point(p, 0.5, isorecon.LocalShape(0.0, 0.0))
        np.testing.assert_allclose(point.point, (0.4, 0.8, 2.0))


class TestAngle:
    def test_orientation_ignored(self):
        """
        angle_between() treats n and -n as the same normal
        """
        assert angle_between((0.0, 0.0, 1.0), (0.0, 0.0, -1.0)) == pytest.approx(0.0)

    def test_right_angle(self):
        assert angle_between((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)) == pytest.approx(90.0)

    def test_small_angle(self):
        """
        angle_between() stays accurate for nearly parallel normals
        """
        a = np.array([0.0, 0.0, 1.0])
        b = np.array([np.sin(1e-7), 0.0, np.cos(1e-7)])
        assert angle_between(a, b) == pytest.approx(np.degrees(1e-7), rel=1e-6)

    def test_rows(self):
        out = angle_between(np.tile([0.0, 0.0, 1.0], (3, 1)), np.eye(3))
        np.testing.assert_allclose(out, (90.0, 90.0, 0.0))


class TestPlaneNormals:
    @pytest.mark.parametrize("seed", range(5))
    def test_recovers_plane(self, seed):
        """
        One of the two candidate normals is the plane inducing the homography
        """
        rng = np.random.default_rng(seed)
        R = Rotation.from_rotvec(rng.uniform(-0.3, 0.3, 3)).as_matrix()
        T = rng.uniform(-0.2, 0.2, 3)
        n = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1.0])
        n /= np.linalg.norm(n)
        H = R + np.outer(T, n) / rng.uniform(0.5, 1.5)
        for scale in (1.0, 3.0, -0.5):
            candidates = plane_normals(scale * H)
            assert candidates is not None
            angles = [angle_between(n, c) for c in candidates]
            assert min(angles) < 1e-5

    def test_rotation_undetermined(self):
        """
        A pure rotation does not single out a plane
        """
        R = Rotation.from_rotvec([0.1, -0.2, 0.05]).as_matrix()
        assert plane_normals(R) is None
