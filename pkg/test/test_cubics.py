# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

import numpy as np
import orjson
import pytest

import isorecon
from isorecon.cubics import (
    COEFFICIENT_ORDER,
    EXP_X,
    EXP_Y,
    equation_terms,
    local_homography,
    polish_shape,
    reduced_coefficients,
    transfer_offset,
)
from isorecon.synthetic import homography_differentials, random_planar_pair

from .util import needs_sympy, sympy


class TestPlanarOracle:
    @pytest.mark.parametrize("seed", range(10))
    def test_exact_root(self, seed):
        """
        The shape of a plane zeroes both cubics of a homography pair
        """
        pair, shape = random_planar_pair(seed)
        assert pair.relative_residual(shape) < 1e-9

    def test_eval_cubics_matches_evaluate(self):
        """
        eval_cubics() and CubicPair.evaluate() agree
        """
        pair, _ = random_planar_pair(11)
        rng = np.random.default_rng(0)
        for s in rng.uniform(-2.0, 2.0, (10, 2)):
            r = isorecon.eval_cubics(pair, isorecon.LocalShape(*s))
            np.testing.assert_allclose(r, pair.evaluate([s])[0], rtol=1e-10, atol=1e-12)

    def test_identity_is_degenerate(self):
        """
        An identity warp gives cubics that vanish identically
        """
        d = homography_differentials(np.eye(3), isorecon.NormalizedPoint(0.1, -0.2))
        pair = isorecon.assemble_cubics(d.target, d)
        assert pair.is_degenerate

    def test_singular_jacobian(self):
        """
        assemble_cubics() refuses a singular warp Jacobian
        """
        H = np.diag([1.0, 0.0, 1.0])
        d = homography_differentials(H, isorecon.NormalizedPoint(0.1, 0.1))
        with pytest.raises(isorecon.DegeneratePairError):
            isorecon.assemble_cubics(isorecon.NormalizedPoint(0.1, 0.0), d)


class TestCubicPair:
    def test_mappings(self):
        """
        from_mappings() reads what to_mappings() writes
        """
        pair, _ = random_planar_pair(2)
        a, b = pair.to_mappings()
        assert list(a) == list(COEFFICIENT_ORDER)
        restored = isorecon.CubicPair.from_mappings(a, b)
        np.testing.assert_array_equal(restored.a, pair.a)
        np.testing.assert_array_equal(restored.b, pair.b)

    def test_mappings_missing(self):
        a = dict.fromkeys(COEFFICIENT_ORDER, 1.0)
        b = dict(a)
        del b["12"]
        with pytest.raises(isorecon.DomainError, match="12"):
            isorecon.CubicPair.from_mappings(a, b)

    def test_dict_keeps_differentials(self):
        """
        from_dict() reassembles the pair with its differentials from to_dict()
        """
        pair, _ = random_planar_pair(3)
        values = orjson.loads(orjson.dumps(pair.to_dict()))
        assert values["degenerate"] is False
        restored = isorecon.CubicPair.from_dict(values)
        assert restored.terms is not None
        np.testing.assert_allclose(restored.a, pair.a, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(restored.b, pair.b, rtol=1e-12, atol=1e-14)
        np.testing.assert_array_equal(restored.diff.J, pair.diff.J)

    def test_dict_without_differentials(self):
        """
        A dict with coefficients only gives a pair without differentials
        """
        pair, _ = random_planar_pair(3)
        a, b = pair.to_mappings()
        restored = isorecon.CubicPair.from_dict({"a": a, "b": b})
        assert restored.terms is None and restored.diff is None
        np.testing.assert_array_equal(restored.a, pair.a)

    def test_dict_bad_differentials(self):
        values = random_planar_pair(3)[0].to_dict()
        values["J"] = [1.0, 2.0, 3.0]
        with pytest.raises(isorecon.DomainError):
            isorecon.CubicPair.from_dict(values)

    def test_coefficient_order(self):
        """
        a[0] multiplies x^3, a[3] y^3 and a[9] is the constant
        """
        a = np.zeros(10)
        a[0], a[3], a[9] = 2.0, 3.0, 5.0
        pair = isorecon.CubicPair(a=a, b=np.zeros(10))
        assert pair.evaluate([(2.0, 1.0)])[0, 0] == 2.0 * 8 + 3.0 + 5.0
        assert (EXP_X[0], EXP_Y[0]) == (3, 0)
        assert (EXP_X[3], EXP_Y[3]) == (0, 3)

    def test_jacobian_finite_difference(self):
        pair, _ = random_planar_pair(4)
        s = np.array([0.3, -0.7])
        h = 1e-6
        numeric = np.column_stack(
            [
                (pair.evaluate([s + h * e])[0] - pair.evaluate([s - h * e])[0]) / (2 * h)
                for e in np.eye(2)
            ],
        )
        np.testing.assert_allclose(pair.jacobian(s), numeric, rtol=1e-6, atol=1e-8)

    def test_normalized(self):
        pair, shape = random_planar_pair(5)
        unit = pair.normalized()
        assert np.max(np.abs(unit.a)) == pytest.approx(1.0)
        assert np.max(np.abs(unit.b)) == pytest.approx(1.0)
        assert unit.relative_residual(shape) < 1e-9

    def test_polish(self):
        """
        polish_shape() moves a perturbed root back onto the exact one
        """
        pair, shape = random_planar_pair(6)
        polished = polish_shape(pair, np.asarray(shape) + 1e-4, steps=10)
        np.testing.assert_allclose(polished, shape, atol=1e-8)


class TestTransfer:
    def test_offset_zero_for_affine(self):
        """
        An affine warp has no second derivatives and so no transfer offset
        """
        H = np.array([[1.1, 0.1, 0.02], [-0.05, 0.95, 0.01], [0.0, 0.0, 1.0]])
        d = homography_differentials(H, isorecon.NormalizedPoint(0.2, 0.1))
        np.testing.assert_allclose(transfer_offset(d), (0.0, 0.0), atol=1e-15)

    def test_reduced_matches_composed(self):
        """
        The assembled cubics are the reduced ones evaluated at z = J^T s
        """
        pair, _ = random_planar_pair(8)
        reduced = reduced_coefficients(equation_terms(pair.p1, pair.diff))
        a_grid, b_grid = reduced.a_grid(), reduced.b_grid()
        rng = np.random.default_rng(1)
        for s in rng.uniform(-1.0, 1.0, (5, 2)):
            z1, z2 = pair.diff.J.T @ s
            expected = (
                np.polynomial.polynomial.polyval2d(z1, z2, a_grid),
                np.polynomial.polynomial.polyval2d(z1, z2, b_grid),
            )
            np.testing.assert_allclose(pair.evaluate([s])[0], expected, rtol=1e-9, atol=1e-12)

    def test_local_homography(self):
        """
        The local homography of a homography warp is that homography, up to scale
        """
        H = np.array([[1.02, 0.05, 0.01], [-0.03, 0.98, 0.02], [0.2, -0.1, 1.0]])
        p2 = isorecon.NormalizedPoint(0.1, -0.2)
        d = homography_differentials(H, p2)
        local = local_homography(d.warped, d)
        w = H[2] @ np.array([p2.u, p2.v, 1.0])
        np.testing.assert_allclose(local, H / w, rtol=1e-10, atol=1e-12)


@needs_sympy
class TestSymbolic:
    def test_composition(self):
        """
        Coefficients agree with a symbolic expansion of the reduced cubics
        """
        pair, _ = random_planar_pair(9)
        reduced = reduced_coefficients(equation_terms(pair.p1, pair.diff))
        x, y = sympy.symbols("x y")
        J = pair.diff.J
        z1 = J[0, 0] * x + J[1, 0] * y
        z2 = J[0, 1] * x + J[1, 1] * y
        for grid, coef in ((reduced.a_grid(), pair.a), (reduced.b_grid(), pair.b)):
            expr = sum(
                float(grid[i, j]) * z1**i * z2**j
                for i in range(4)
                for j in range(4)
                if grid[i, j] != 0
            )
            poly = sympy.Poly(sympy.expand(expr), x, y)
            expected = [float(poly.coeff_monomial(x**i * y**j)) for i, j in zip(EXP_X, EXP_Y)]
            scale = np.max(np.abs(coef))
            np.testing.assert_allclose(coef / scale, np.array(expected) / scale, atol=1e-10)
