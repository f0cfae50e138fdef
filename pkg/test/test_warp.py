# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

import numpy as np
import pytest

import isorecon
from isorecon.warp import (
    MIN_CORRESPONDENCES,
    mad_statistics,
    warp_differentials,
)


def _grid(count=15, span=0.3):
    g = np.linspace(-span, span, count)
    u, v = np.meshgrid(g, g)
    return np.column_stack((u.reshape(-1), v.reshape(-1)))


def _smooth(points):
    u, v = points[:, 0], points[:, 1]
    return np.column_stack(
        (u + 0.2 * np.sin(2.0 * v) + 0.05, v + 0.1 * u * u - 0.03 * u * v),
    )


class TestFitWarp:
    def test_affine_exact(self):
        """
        fit_warp() reproduces an affine map with its constant Jacobian
        """
        src = _grid()
        A = np.array([[1.1, 0.2], [-0.1, 0.9]])
        dst = src @ A.T + (0.05, -0.02)
        warp = isorecon.fit_warp(src, dst)
        at = np.array([[0.1, -0.05], [-0.2, 0.2]])
        values, jacobians, hessians = warp.derivatives(at)
        np.testing.assert_allclose(values, at @ A.T + (0.05, -0.02), atol=1e-8)
        np.testing.assert_allclose(jacobians, np.broadcast_to(A, (2, 2, 2)), atol=1e-6)
        np.testing.assert_allclose(hessians, 0.0, atol=1e-4)

    def test_derivatives_finite_difference(self):
        """
        Analytic first and second derivatives match finite differences
        """
        src = _grid()
        warp = isorecon.fit_warp(src, _smooth(src))
        at = np.array([[0.05, 0.1], [-0.12, 0.03], [0.2, -0.17]])
        _, jacobians, hessians = warp.derivatives(at)
        h = 1e-5
        for a, e in enumerate(np.eye(2)):
            forward = warp.derivatives(at + h * e)
            backward = warp.derivatives(at - h * e)
            np.testing.assert_allclose(
                jacobians[:, :, a],
                (forward[0] - backward[0]) / (2 * h),
                rtol=1e-5,
                atol=1e-7,
            )
            # hessians[i, k, a, b] is d2 eta_k / da db
            np.testing.assert_allclose(
                hessians[:, :, :, a],
                (forward[1] - backward[1]) / (2 * h),
                rtol=1e-4,
                atol=1e-5,
            )

    def test_hessian_symmetric(self):
        src = _grid()
        warp = isorecon.fit_warp(src, _smooth(src))
        _, _, hessians = warp.derivatives(src[:10])
        np.testing.assert_allclose(hessians, np.swapaxes(hessians, -1, -2))

    @pytest.mark.parametrize("count", [40, 100, 225, 500, 10_000])
    def test_grid_overdetermined(self, count):
        """
        The default control grid has at least two points per coefficient
        """
        src = np.random.default_rng(count).uniform(-0.3, 0.3, (count, 2))
        warp = isorecon.fit_warp(src, src)
        ku, kv = warp.intervals
        assert ku == kv <= 16
        assert (ku + 3) * (kv + 3) <= count / 2

    def test_too_few(self):
        """
        fit_warp() needs MIN_CORRESPONDENCES points
        """
        src = _grid(3)
        assert len(src) < MIN_CORRESPONDENCES
        with pytest.raises(isorecon.DomainError):
            isorecon.fit_warp(src, src)

    def test_length_mismatch(self):
        src = _grid()
        with pytest.raises(isorecon.DomainError):
            isorecon.fit_warp(src, src[:-1])

    def test_non_finite(self):
        src = _grid()
        dst = src.copy()
        dst[3, 0] = np.nan
        with pytest.raises(isorecon.DomainError):
            isorecon.fit_warp(src, dst)

    def test_lambda_positive(self):
        src = _grid()
        with pytest.raises(isorecon.DomainError):
            isorecon.fit_warp(src, src, lam=0.0)

    def test_collinear_escalates(self):
        """
        Collinear sources are solved by the bending penalty or raise IllPosedWarpError
        """
        src = np.column_stack((np.linspace(-0.3, 0.3, 40), np.zeros(40)))
        try:
            warp = isorecon.fit_warp(src, src)
        except isorecon.IllPosedWarpError:
            return
        assert np.all(np.isfinite(warp.coefficients))

    def test_eval_warp_extrapolated(self):
        """
        eval_warp() flags points outside the fitted domain
        """
        src = _grid()
        warp = isorecon.fit_warp(src, src)
        inside = isorecon.eval_warp(warp, isorecon.NormalizedPoint(0.0, 0.0))
        outside = isorecon.eval_warp(warp, isorecon.NormalizedPoint(2.0, 0.0))
        assert not inside.extrapolated
        assert outside.extrapolated
        assert (inside.u, inside.v) == pytest.approx((0.0, 0.0), abs=1e-8)


class TestDifferentials:
    def test_naming(self):
        """
        PairDifferentials.j follows the j1..j4 naming of J = [[j1, j3], [j2, j4]]
        """
        src = _grid()
        A = np.array([[1.0, 2.0], [3.0, 4.0]]) * 0.1 + np.eye(2)
        warp = isorecon.fit_warp(src, src @ A.T)
        d = warp_differentials(warp, isorecon.NormalizedPoint(0.0, 0.0))
        j1, j2, j3, j4 = d.j
        assert (j1, j2, j3, j4) == pytest.approx((A[0, 0], A[1, 0], A[0, 1], A[1, 1]), abs=1e-6)
        assert d.det == pytest.approx(np.linalg.det(A), abs=1e-6)
        assert not d.degenerate
        assert d.warped == pytest.approx((0.0, 0.0), abs=1e-8)


class TestMad:
    def test_statistics(self):
        """
        sigma is 1.4826 MAD and the threshold three sigma
        """
        stats = mad_statistics([1.0, 2.0, 3.0, 4.0, 100.0])
        assert stats.median == 3.0
        assert stats.mad == 1.0
        assert stats.sigma_hat == pytest.approx(1.4826)
        assert stats.threshold == pytest.approx(4.4478)
        np.testing.assert_array_equal(stats.flag([1.0, 2.0, 3.0, 4.0, 100.0]), [0, 1, 2, 3])

    def test_flag_is_strict_and_absolute(self):
        """
        A discrepancy is kept only when it lies strictly below three sigma
        """
        d = [1.0, 2.0, 3.0, 4.0, 6.0]
        stats = mad_statistics(d)
        assert (stats.median, stats.mad) == (3.0, 1.0)
        assert stats.threshold == pytest.approx(4.4478)
        # 6 - median = 3 would pass a rule relative to the median
        np.testing.assert_array_equal(stats.flag(d), [0, 1, 2, 3])
        at_threshold = stats._replace(threshold=4.0)
        np.testing.assert_array_equal(at_threshold.flag(d), [0, 1, 2])

    def test_flag_exact_fit(self):
        """
        A zero threshold still keeps exact correspondences
        """
        stats = mad_statistics([0.0, 0.0, 0.0, 1.0])
        assert stats.threshold == 0.0
        np.testing.assert_array_equal(stats.flag([0.0, 0.0, 0.0, 1.0]), [0, 1, 2])

    def test_flags_mismatches(self):
        """
        robust_fit_mad() drops grossly wrong correspondences
        """
        rng = np.random.default_rng(3)
        src = _grid(20)
        dst = _smooth(src) + rng.normal(0.0, 5e-4, src.shape)
        bad = rng.choice(len(src), size=40, replace=False)
        dst[bad] += rng.uniform(0.05, 0.1, (40, 2)) * rng.choice([-1.0, 1.0], (40, 2))
        warp, record = isorecon.robust_fit_mad(src, dst, delta=1e-5)
        mask = record.mask
        assert not mask[bad].any()
        # three MAD-sigmas of a one-sided discrepancy keep most, not all, clean points
        assert mask.sum() >= 0.5 * (len(src) - len(bad))
        good = np.setdiff1d(np.arange(len(src)), bad)
        error = np.abs(warp.evaluate(src[good]) - _smooth(src[good]))
        assert np.max(error) < 5e-3

    def test_sparse_contamination(self):
        """
        On a hundred scattered points, mismatches are flagged without bending the warp
        """
        rng = np.random.default_rng(5)
        src = rng.uniform(-0.25, 0.25, (100, 2))
        dst = _smooth(src) + rng.normal(0.0, 3e-4, src.shape)
        bad = rng.choice(len(src), size=20, replace=False)
        angle = rng.uniform(0.0, 2.0 * np.pi, len(bad))
        dst[bad] += 0.0625 * np.column_stack((np.cos(angle), np.sin(angle)))
        warp, record = isorecon.robust_fit_mad(src, dst, delta=1.4e-3)
        assert warp.intervals == (4, 4)
        assert np.count_nonzero(record.mask[bad]) <= 2
        good = np.setdiff1d(np.arange(len(src)), bad)
        error = np.abs(warp.evaluate(src[good]) - _smooth(src[good]))
        assert np.max(error) < 5e-3

    def test_clean_data(self):
        """
        On clean data the loop converges on an accurate warp
        """
        src = _grid()
        warp, record = isorecon.robust_fit_mad(src, _smooth(src))
        assert record.converged
        assert record.iterations >= 1
        assert np.max(np.abs(warp.evaluate(src) - _smooth(src))) < 1e-3

    def test_delta_positive(self):
        src = _grid()
        with pytest.raises(isorecon.DomainError):
            isorecon.robust_fit_mad(src, src, delta=0.0)
