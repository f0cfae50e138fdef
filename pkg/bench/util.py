# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

import os
from functools import cache

import isorecon
from isorecon.cubics import CubicPair
from isorecon.geometry import LocalShape
from isorecon.synthetic import CylinderParams, random_planar_pair

if hasattr(os, "sched_setaffinity"):
    os.sched_setaffinity(os.getpid(), {0, 1})


@cache
def planar_pairs(count: int, seed: int = 0) -> tuple[tuple[CubicPair, LocalShape], ...]:
    return tuple(random_planar_pair([seed, i]) for i in range(count))


@cache
def cylinder(n_images: int, n_points: int, error_fraction: float = 0.0, seed: int = 0):
    params = CylinderParams(
        n_images=n_images,
        n_points=n_points,
        error_fraction=error_fraction,
    )
    return isorecon.generate_cylinder(params, seed)


def hit_rate(solve, pairs, tol: float = 1e-5) -> float:
    hits = 0
    for pair, shape in pairs:
        try:
            found = solve(pair).shapes
        except ArithmeticError:
            continue
        if len(found) and min(abs(x - shape.x) + abs(y - shape.y) for x, y in found) < tol:
            hits += 1
    return hits / len(pairs)
