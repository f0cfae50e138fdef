# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Command-line interface.

Exit status is 0 on success, including runs with per-point failures, 2 on
I/O or configuration errors and 1 when a debug command hits a numerical
failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from ._version import __version__
from .config import BASELINES, SOLVERS, THREADS_ENV, PipelineConfig, dumps_json
from .cubics import CubicPair, assemble_cubics
from .errors import ConfigError, DatasetFormatError, DomainError, IsoReconError
from .evaluation import SWEEPS, run_sweep, score
from .formats import (
    CORRESPONDENCE_FILE,
    LABELS_FILE,
    REPORT_FILE,
    TRUTH_DIR,
    read_clouds,
    read_correspondences,
    read_ground_truth,
    read_intrinsics,
    read_json,
    write_clouds,
    write_dataset,
    write_json,
    write_sweep_csv,
)
from .geometry import NormalizedPoint
from .normals import PAIR_SOLVERS
from .pipeline import mad_delta, run_pipeline
from .synthetic import CylinderParams, generate_cylinder, homography_differentials
from .warp import robust_fit_mad, warp_differentials

__all__ = ("main",)

logger = logging.getLogger(__name__)

# flag name -> config key
CONFIG_FLAGS = {
    "solver": "solver",
    "subset_size": "subset_size",
    "baseline": "baseline",
    "epsilon": "epsilon_deg",
    "min_subset": "min_subset",
    "neighbors": "neighbors",
    "warp_lambda": "warp_lambda",
    "flag_factor": "flag_factor",
    "inlier_tolerance": "inlier_tolerance",
    "grid_size": "grid_size",
    "seed": "seed",
    "threads": "threads",
}

SWITCHES = {
    "hallucinate_grid": ("hallucinate_grid", True),
    "no_mad": ("use_mad", False),
    "no_multi_reference": ("use_multi_reference", False),
    "no_isometry_filter": ("use_isometry_filter", False),
}


def _emit(payload: Any, out: Path | None) -> None:
    if out is None:
        sys.stdout.buffer.write(dumps_json(payload))
        sys.stdout.flush()
    else:
        write_json(out, payload)


def _load_config(args: argparse.Namespace, environ=None) -> PipelineConfig:
    env = os.environ if environ is None else environ
    base = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    overrides: dict[str, Any] = {}
    if THREADS_ENV in env:
        overrides["threads"] = PipelineConfig.from_env(env).threads
    for flag, key in CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    for flag, (key, value) in SWITCHES.items():
        if getattr(args, flag, False):
            overrides[key] = value
    return base.replace(**overrides)


def cmd_synth(args: argparse.Namespace) -> int:
    params = CylinderParams(
        n_images=args.images,
        n_points=args.points,
        noise_px=args.noise,
        error_fraction=args.error_fraction,
        error_magnitude=tuple(args.error_magnitude),
        missing_fraction=args.missing_fraction,
        bend=not args.flat,
    )
    scene, data = generate_cylinder(params, args.seed)
    root = write_dataset(args.out, scene, data)
    logger.info(
        "wrote %d images x %d tracks (%d corrupted) to %s",
        data.n_images,
        data.n_tracks,
        int(scene.corrupted.sum()),
        root,
    )
    return 0


def _dataset_file(path: Path) -> Path:
    return path / CORRESPONDENCE_FILE if path.is_dir() else path


def cmd_reconstruct(args: argparse.Namespace) -> int:
    config = _load_config(args)
    source = _dataset_file(args.dataset)
    intrinsics = read_intrinsics(args.intrinsics) if args.intrinsics else None
    data = read_correspondences(source, intrinsics)
    result = run_pipeline(data, config)

    write_clouds(args.out, result.points, result.normals, result.inliers)
    report = result.report(timings=not args.no_timings)
    root = source.parent
    if (root / TRUTH_DIR).is_dir() and (root / LABELS_FILE).is_file():
        truth = read_ground_truth(root)
        metrics = score(
            result.points,
            result.normals,
            result.inliers,
            truth.points,
            truth.normals,
            truth.corrupted,
            data.visible,
        ).to_dict()
        metrics.pop("timings")
        report["metrics"] = metrics
    write_json(args.out / REPORT_FILE, report)
    if result.failures:
        logger.warning("%d failures recorded in the report", len(result.failures))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    if args.sweep:
        config = _load_config(args)
        rows = run_sweep(
            args.sweep,
            seeds=range(config.seed, config.seed + args.seeds),
            config=config,
        )
        payload = [row.to_dict() for row in rows]
        if args.csv:
            write_sweep_csv(args.csv, payload)
        _emit({"sweep": args.sweep, "rows": payload}, args.out)
        return 0

    if args.reconstruction is None or args.ground_truth is None:
        raise ConfigError("evaluate needs a reconstruction and a ground truth directory")
    truth = read_ground_truth(args.ground_truth)
    data = truth.correspondences
    clouds = read_clouds(args.reconstruction, data.n_images, data.n_tracks)
    report = score(
        clouds.points,
        clouds.normals,
        clouds.inliers,
        truth.points,
        truth.normals,
        truth.corrupted,
        data.visible,
    ).to_dict()
    report.pop("timings")
    _emit(report, args.out)
    return 0


def _solution_payload(pair: CubicPair, solver: str) -> dict[str, Any]:
    solutions = PAIR_SOLVERS[solver](pair)
    return {
        "solver": solver,
        "shapes": [list(map(float, s)) for s in solutions.shapes],
        "residuals": [float(r) for r in solutions.residuals],
    }


def cmd_solve_pair(args: argparse.Namespace) -> int:
    payload = read_json(args.pair)
    if not isinstance(payload, dict) or not {"a", "b"} <= payload.keys():
        raise DatasetFormatError("expected objects 'a' and 'b'", str(args.pair))
    try:
        pair = CubicPair.from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"expected objects 'a' and 'b': {exc}", str(args.pair)) from exc
    if args.solver == "substitution" and pair.terms is None:
        raise ConfigError("the substitution solver needs p1, p2, J, Hu and Hv in the pair file")
    _emit(_solution_payload(pair, args.solver), args.out)
    return 0


def cmd_dump_cubics(args: argparse.Namespace) -> int:
    if args.homography is not None:
        H = np.asarray(args.homography, dtype=np.float64).reshape(3, 3)
        d = homography_differentials(H, NormalizedPoint(*args.point))
        assert d.warped is not None
        p1 = d.warped
    else:
        if args.dataset is None or args.track is None or args.images is None:
            raise ConfigError("dump-cubics needs --homography or --dataset, --track and --images")
        config = PipelineConfig()
        data = read_correspondences(_dataset_file(args.dataset))
        points = data.normalized()
        reference, other = (i - 1 for i in args.images)
        j = args.track - 1
        if not (data.visible[reference, j] and data.visible[other, j]):
            raise DomainError(f"track {args.track} is not visible in both images")
        common = data.visible[reference] & data.visible[other]
        warp, _ = robust_fit_mad(
            points[other, common],
            points[reference, common],
            config.warp_lambda,
            mad_delta(config, data.intrinsics),
        )
        d = warp_differentials(warp, NormalizedPoint(*points[other, j]))
        p1 = NormalizedPoint(*points[reference, j])
    _emit(assemble_cubics(p1, d).to_dict(), args.out)
    return 0


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("pipeline configuration")
    group.add_argument("--config", type=Path, help="JSON configuration file; flags override it")
    group.add_argument("--solver", choices=SOLVERS)
    group.add_argument("--subset-size", type=int)
    group.add_argument("--baseline", choices=BASELINES)
    group.add_argument("--epsilon", type=float, help="consensus threshold in degrees")
    group.add_argument("--min-subset", type=int)
    group.add_argument("--neighbors", type=int)
    group.add_argument("--warp-lambda", type=float)
    group.add_argument("--flag-factor", type=float)
    group.add_argument("--inlier-tolerance", type=float)
    group.add_argument("--grid-size", type=int)
    group.add_argument("--seed", type=int)
    group.add_argument("--threads", type=int, help=f"worker threads (env {THREADS_ENV})")
    group.add_argument("--hallucinate-grid", action="store_true")
    group.add_argument("--no-mad", action="store_true")
    group.add_argument("--no-multi-reference", action="store_true")
    group.add_argument("--no-isometry-filter", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isorecon",
        description="Robust isometric non-rigid structure from motion.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        default="warning",
        choices=("debug", "info", "warning", "error"),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic cylinder dataset")
    synth.add_argument("--out", type=Path, required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--images", type=int, default=7)
    synth.add_argument("--points", type=int, default=400)
    synth.add_argument("--noise", type=float, default=1.0, help="pixel noise std")
    synth.add_argument("--error-fraction", type=float, default=0.0)
    synth.add_argument(
        "--error-magnitude",
        type=float,
        nargs=2,
        default=(100.0, 100.0),
        metavar=("LO", "HI"),
    )
    synth.add_argument("--missing-fraction", type=float, default=0.0)
    synth.add_argument("--flat", action="store_true", help="keep the sheet planar")
    synth.set_defaults(func=cmd_synth)

    recon = sub.add_parser("reconstruct", help="reconstruct a dataset")
    recon.add_argument("dataset", type=Path, help="dataset directory or correspondence file")
    recon.add_argument("--out", type=Path, required=True)
    recon.add_argument("--intrinsics", type=Path)
    recon.add_argument("--no-timings", action="store_true", help="omit timings from the report")
    _add_config_flags(recon)
    recon.set_defaults(func=cmd_reconstruct)

    ev = sub.add_parser("evaluate", help="score a reconstruction or run a sweep")
    ev.add_argument("reconstruction", type=Path, nargs="?")
    ev.add_argument("ground_truth", type=Path, nargs="?")
    ev.add_argument("--out", type=Path)
    ev.add_argument("--sweep", choices=SWEEPS)
    ev.add_argument("--seeds", type=int, default=1)
    ev.add_argument("--csv", type=Path)
    _add_config_flags(ev)
    ev.set_defaults(func=cmd_evaluate)

    solve = sub.add_parser("solve-pair", help="solve one cubic pair from JSON")
    solve.add_argument("pair", type=Path, help="JSON file as written by dump-cubics")
    solve.add_argument("--solver", choices=SOLVERS, default="resultant")
    solve.add_argument("--out", type=Path)
    solve.set_defaults(func=cmd_solve_pair)

    dump = sub.add_parser("dump-cubics", help="print the cubic pair of one point pair")
    dump.add_argument("--homography", type=float, nargs=9)
    dump.add_argument("--point", type=float, nargs=2, default=(0.0, 0.0), metavar=("U", "V"))
    dump.add_argument("--dataset", type=Path)
    dump.add_argument("--track", type=int)
    dump.add_argument("--images", type=int, nargs=2, metavar=("REFERENCE", "OTHER"))
    dump.add_argument("--out", type=Path)
    dump.set_defaults(func=cmd_dump_cubics)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, DatasetFormatError, DomainError, OSError) as exc:
        print(f"isorecon: error: {exc}", file=sys.stderr)
        return 2
    except IsoReconError as exc:
        print(f"isorecon: error: {exc}", file=sys.stderr)
        return 1
