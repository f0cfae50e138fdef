# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

import pytest

from .data import pair_counts, solvers
from .util import hit_rate, planar_pairs


def _solve_all(solve, pairs):
    for pair, _ in pairs:
        try:
            solve(pair)
        except ArithmeticError:
            pass


@pytest.mark.parametrize("solver", solvers)
@pytest.mark.parametrize("count", pair_counts)
def test_solve_pairs(benchmark, count, solver):
    solve = solvers[solver]
    benchmark.group = f"{count} planar pairs"
    benchmark.extra_info["solver"] = solver
    pairs = planar_pairs(count)
    benchmark.extra_info["hit_rate"] = hit_rate(solve, pairs)
    benchmark(_solve_all, solve, pairs)
