# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

import numpy as np
import pytest

import isorecon
from isorecon.integration import GradientField, knn_edges


def _plane(count=300, seed=0):
    rng = np.random.default_rng(seed)
    normal = np.array([0.2, -0.3, 1.0])
    normal /= np.linalg.norm(normal)
    distance = 0.5
    points = rng.uniform(-0.3, 0.3, (count, 2))
    q = np.column_stack((points, np.ones(count)))
    nq = q @ normal
    shapes = normal[:2] / nq[:, None]
    truth = q * (distance / nq)[:, None]
    return points, shapes, truth


class TestIntegrate:
    def test_plane_up_to_scale(self):
        """
        Integrating the shapes of a plane gives the plane up to one scale
        """
        points, shapes, truth = _plane()
        surface = isorecon.integrate(GradientField.from_arrays(points, shapes))
        ratio = truth[:, 2] / surface.points3d[:, 2]
        assert np.std(ratio) / np.mean(ratio) < 1e-3
        np.testing.assert_allclose(surface.points3d * np.mean(ratio), truth, rtol=2e-3, atol=1e-6)
        assert not surface.multi_component
        assert surface.residual < 1e-2

    def test_points_on_rays(self):
        """
        Every point lies on the ray of its image point
        """
        points, shapes, _ = _plane(50)
        surface = isorecon.integrate(GradientField.from_arrays(points, shapes))
        np.testing.assert_allclose(
            surface.points3d[:, :2] / surface.points3d[:, 2:],
            points,
            rtol=1e-12,
        )

    def test_normalized_gauge(self):
        """
        log inverse depth has zero mean within each component
        """
        points, shapes, _ = _plane(80)
        surface = isorecon.integrate(GradientField.from_arrays(points, shapes))
        assert np.mean(np.log(surface.beta)) == pytest.approx(0.0, abs=1e-12)

    def test_components(self):
        """
        Far apart clusters are integrated as independent components
        """
        rng = np.random.default_rng(1)
        cluster = rng.uniform(-0.01, 0.01, (10, 2))
        points = np.vstack((cluster - 0.5, cluster + 0.5))
        surface = isorecon.integrate(
            GradientField.from_arrays(points, np.zeros_like(points)),
            k=9,
        )
        assert surface.multi_component
        assert len(np.unique(surface.components)) == 2
        assert surface.n_components == 2
        np.testing.assert_allclose(surface.beta, 1.0)

    def test_non_finite(self):
        points, shapes, _ = _plane(10)
        shapes[2, 0] = np.nan
        with pytest.raises(isorecon.DomainError):
            GradientField.from_arrays(points, shapes)

    def test_too_few(self):
        with pytest.raises(isorecon.DomainError):
            GradientField.from_arrays(np.zeros((2, 2)), np.zeros((2, 2)))

    def test_shape_mismatch(self):
        with pytest.raises(isorecon.DomainError):
            GradientField.from_arrays(np.zeros((5, 2)), np.zeros((4, 2)))


class TestKnnEdges:
    def test_unique_sorted(self):
        rng = np.random.default_rng(2)
        edges = knn_edges(rng.uniform(size=(30, 2)), 4)
        assert np.all(edges[:, 0] < edges[:, 1])
        assert len(np.unique(edges, axis=0)) == len(edges)

    def test_k_capped(self):
        """
        k larger than the point count links every pair
        """
        edges = knn_edges(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), 10)
        assert len(edges) == 3
