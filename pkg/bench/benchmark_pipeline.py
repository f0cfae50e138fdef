# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

import pytest

import isorecon
from isorecon.warp import robust_fit_mad

from .data import scenes, solvers
from .util import cylinder


@pytest.mark.parametrize("scene", scenes)
def test_fit_warp(benchmark, scene):
    _, data = cylinder(*scenes[scene])
    points = data.normalized()
    common = data.visible[0] & data.visible[1]
    benchmark.group = "warp fit"
    benchmark.extra_info["scene"] = scene
    benchmark(robust_fit_mad, points[0, common], points[1, common])


@pytest.mark.parametrize("solver", solvers)
@pytest.mark.parametrize("scene", scenes)
def test_pipeline(benchmark, scene, solver):
    truth, data = cylinder(*scenes[scene])
    config = isorecon.PipelineConfig(solver=solver)
    benchmark.group = f"{scene} pipeline"
    benchmark.extra_info["solver"] = solver
    result = benchmark.pedantic(isorecon.run_pipeline, args=(data, config), rounds=1)
    metrics = isorecon.evaluate(result, truth)
    benchmark.extra_info["depth_rmse_mm"] = metrics.depth_rmse_mm
    benchmark.extra_info["shape_rmse_deg"] = metrics.shape_rmse_deg
