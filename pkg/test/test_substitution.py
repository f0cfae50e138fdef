# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

import dataclasses

import numpy as np
import pytest
from numpy.polynomial import polynomial as P

import isorecon
from isorecon.substitution import (
    build_substitution,
    factor_sextic,
    s_terms,
    solve_c_nonzero,
    solve_c_zero,
)
from isorecon.synthetic import random_planar_pair

from .util import pair_hits


class TestSubstitutionSystem:
    def test_sextic_is_eliminated_cubic(self):
        """
        The sextic equals C^2 A'(-F/C, z2) away from the roots of C
        """
        pair, _ = random_planar_pair(1)
        system = build_substitution(pair)
        a2, a1, a0 = system.a_polys()
        sextic = system.sextic()
        assert len(sextic) <= 7
        for z2 in (-1.3, -0.2, 0.4, 2.1):
            C = P.polyval(z2, system.C)
            F = P.polyval(z2, system.F)
            z1 = -F / C
            A = P.polyval(z2, a2) * z1 * z1 + P.polyval(z2, a1) * z1 + P.polyval(z2, a0)
            assert P.polyval(z2, sextic) == pytest.approx(C * C * A, rel=1e-8, abs=1e-12)

    def test_to_shape_inverts_jacobian(self):
        pair, shape = random_planar_pair(2)
        system = build_substitution(pair)
        z = system.J.T @ np.asarray(shape)
        np.testing.assert_allclose(system.to_shape(*z), shape)

    def test_true_root_has_zero_reduced_residual(self):
        pair, shape = random_planar_pair(3)
        system = build_substitution(pair)
        z1, z2 = system.J.T @ np.asarray(shape)
        scale = max(abs(v) for v in system.reduced)
        assert system.reduced_residual(z1, z2) < 1e-9 * scale * (1 + abs(z1) + abs(z2)) ** 3

    def test_plane_roots_hold_true_shape(self):
        """
        The true shape of a planar pair is one of the two plane roots
        """
        for seed in range(10):
            pair, shape = random_planar_pair(seed)
            system = build_substitution(pair)
            roots = system.plane_roots()
            assert roots is not None
            z2 = (system.J.T @ np.asarray(shape))[1]
            assert np.min(np.abs(roots - z2)) < 1e-6 * (1.0 + abs(z2))

    def test_sextic_factors(self):
        """
        The plane quadratic divides the sextic, leaving a quartic
        """
        factored = 0
        for seed in range(20):
            pair, _ = random_planar_pair(seed)
            system = build_substitution(pair)
            result = factor_sextic(system)
            if result is None:
                continue
            factored += 1
            roots, quartic = result
            assert len(quartic) <= 5
            D = system.quadratic()
            # both roots are real, so the discriminant is non-negative
            assert D[1] ** 2 - 4.0 * D[0] * D[2] >= -1e-10 * D[1] ** 2
            product = P.polymul(D, quartic)
            sextic = system.sextic()
            np.testing.assert_allclose(
                product[: len(sextic)],
                sextic,
                rtol=1e-6,
                atol=1e-6 * np.max(np.abs(sextic)),
            )
        assert factored >= 18

    def test_factor_on_spline_warp(self):
        """
        The factorization also holds for a non-planar warp
        """
        pair, _ = random_planar_pair(11)
        d = pair.diff
        bent = dataclasses.replace(d, Hu=d.Hu + 0.3, Hv=d.Hv - 0.2)
        system = build_substitution(isorecon.assemble_cubics(pair.p1, bent))
        assert factor_sextic(system) is not None

    def test_s_terms_count(self):
        pair, _ = random_planar_pair(4)
        assert len(s_terms(pair.terms)) == 16

    def test_needs_differentials(self):
        """
        A pair read from coefficients alone cannot be substituted
        """
        pair, _ = random_planar_pair(5)
        bare = isorecon.CubicPair.from_mappings(*pair.to_mappings())
        with pytest.raises(isorecon.DomainError):
            build_substitution(bare)


class TestSolve:
    def test_recovers_planar_shape(self):
        """
        Substitution finds the exact shape of almost every planar pair
        """
        assert pair_hits(isorecon.solve_pair_substitution, range(30)) >= 0.9

    def test_solutions_ranked(self):
        """
        Solutions come back best first and all solve the cubics
        """
        pair, _ = random_planar_pair(6)
        solutions = isorecon.solve_pair_substitution(pair)
        assert 1 <= len(solutions) <= 9
        assert np.all(np.diff(solutions.residuals) >= 0)
        for s in solutions:
            assert pair.relative_residual(s) < 1e-6

    def test_branches_cover_solutions(self):
        """
        Every solution comes from the C != 0 branch or the C = 0 branch
        """
        hits = 0
        for seed in range(10):
            pair, shape = random_planar_pair(seed)
            system = build_substitution(pair)
            found = np.concatenate(
                (solve_c_nonzero(system).shapes, solve_c_zero(system).shapes),
            )
            if len(found):
                hits += np.min(np.max(np.abs(found - np.asarray(shape)), axis=1)) < 1e-4
        assert hits >= 8

    def test_degenerate(self):
        """
        A pair with vanishing cubics raises DegeneratePairError
        """
        pair, _ = random_planar_pair(8)
        zero = dataclasses.replace(pair, a=np.zeros(10))
        with pytest.raises(isorecon.DegeneratePairError):
            isorecon.solve_pair_substitution(zero)
