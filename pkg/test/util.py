# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

import dataclasses
import functools
import itertools

sympy = None  # type: ignore
try:
    import sympy  # type: ignore # noqa: F401
except ImportError:
    pass

import pytest

import isorecon
from isorecon.geometry import NormalizedPoint
from isorecon.normals import TrackObservations
from isorecon.synthetic import CylinderParams, homography_differentials, random_planar_pair

needs_sympy = pytest.mark.skipif(sympy is None, reason="sympy is not installed")

FLAT = CylinderParams(
    n_images=5,
    n_points=60,
    bend=False,
    noise_px=0.0,
    max_rotation_deg=30.0,
)

SMALL = CylinderParams(n_images=5, n_points=100, noise_px=0.5)


@functools.cache
def flat_scene(seed=0):
    return isorecon.generate_cylinder(FLAT, seed)


def planar_track(track=0, seed=0, images=None):
    """
    Observations of one track of a flat scene with exact homography
    differentials between every ordered image pair.
    """
    scene, data = flat_scene(seed)
    points = data.normalized()[:, track]
    count = data.n_images if images is None else images
    differentials = {}
    for k, t in itertools.permutations(range(count), 2):
        H = scene.plane_homography(k, t)
        differentials[(k, t)] = homography_differentials(H, NormalizedPoint(*points[k]))
    observations = TrackObservations(
        track_id=track + 1,
        points=points[:count],
        visible=data.visible[:count, track],
        differentials=differentials,
    )
    return scene, observations


@functools.cache
def small_reconstruction(seed=0, **overrides):
    params = dataclasses.replace(SMALL, **overrides)
    scene, data = isorecon.generate_cylinder(params, seed)
    config = isorecon.PipelineConfig(solver="substitution", seed=seed)
    return scene, data, isorecon.run_pipeline(data, config)


def pair_hits(solve, seeds, tol=1e-5):
    """
    Share of random planar pairs whose exact shape is among the solutions.
    """
    hits = 0
    for seed in seeds:
        pair, shape = random_planar_pair(seed)
        try:
            solutions = solve(pair)
        except isorecon.IsoReconError:
            continue
        hits += solutions.contains(shape, tol)
    return hits / len(seeds)
