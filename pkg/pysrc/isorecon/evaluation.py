# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Reconstruction metrics and parameter sweeps on synthetic scenes.

Depth errors are measured after one global scale and translation alignment
per sequence, since the reconstruction fixes relative scales only. Shape
errors are angles between normals. Classification treats uncorrupted
observations as positives and predicted inliers as positive predictions.
"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Iterable, Sequence
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config import PipelineConfig
from .errors import DomainError
from .geometry import angle_between
from .pipeline import Reconstruction, run_pipeline
from .synthetic import CylinderParams, SyntheticScene, generate_cylinder

__all__ = (
    "SWEEPS",
    "EvalReport",
    "SweepRow",
    "align_similarity",
    "evaluate",
    "run_sweep",
    "score",
)

logger = logging.getLogger(__name__)

METRES_TO_MM = 1000.0

SWEEPS = ("contamination", "magnitude", "subset-size")
RMSE_KEYS = ("depth_rmse_mm", "shape_rmse_deg", "clean_depth_rmse_mm", "clean_shape_rmse_deg")


@dataclasses.dataclass(frozen=True)
class EvalReport:
    depth_rmse_mm: float
    shape_rmse_deg: float
    per_image_depth_mm: tuple[float, ...]
    per_image_shape_deg: tuple[float, ...]
    tp: int
    tn: int
    fp: int
    fn: int
    scale: float
    evaluated: int
    failed: bool = False
    clean_depth_rmse_mm: float = float("nan")
    clean_shape_rmse_deg: float = float("nan")
    timings: dict[str, float] = dataclasses.field(default_factory=dict)

    @property
    def tpr(self) -> float:
        return _rate(self.tp, self.tp + self.fn)

    @property
    def tnr(self) -> float:
        return _rate(self.tn, self.tn + self.fp)

    @property
    def fpr(self) -> float:
        return _rate(self.fp, self.tn + self.fp)

    @property
    def fnr(self) -> float:
        return _rate(self.fn, self.tp + self.fn)

    @property
    def roc_point(self) -> tuple[float, float]:
        return self.fpr, self.tpr

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["per_image_depth_mm"] = list(self.per_image_depth_mm)
        out["per_image_shape_deg"] = list(self.per_image_shape_deg)
        out.update(tpr=self.tpr, tnr=self.tnr, fpr=self.fpr, fnr=self.fnr)
        for key in (*RMSE_KEYS, "tpr", "tnr", "fpr", "fnr"):
            if not np.isfinite(out[key]):
                out[key] = None
        return out


def _rate(num: int, den: int) -> float:
    return num / den if den else float("nan")


def align_similarity(source: ArrayLike, target: ArrayLike) -> tuple[float, NDArray[np.float64]]:
    """Least-squares ``scale, shift`` with ``scale * source + shift ~ target``."""
    X = np.asarray(source, dtype=np.float64)
    Y = np.asarray(target, dtype=np.float64)
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mx, Y - my
    den = float(np.sum(Xc * Xc))
    scale = float(np.sum(Xc * Yc)) / den if den > 0 else 1.0
    return scale, my - scale * mx


def _rmse(values: NDArray[np.float64]) -> float:
    return float(np.sqrt(np.mean(values**2))) if len(values) else float("nan")


def score(
    points: ArrayLike,
    normals: ArrayLike,
    inliers: ArrayLike,
    truth_points: ArrayLike,
    truth_normals: ArrayLike,
    corrupted: ArrayLike,
    visible: ArrayLike,
    *,
    units: float = METRES_TO_MM,
) -> EvalReport:
    """Compare ``[image, track]`` arrays against ground truth.

    Geometry is scored on every reconstructed observation predicted inlier,
    corrupted or not; when none is predicted, on every reconstructed visible
    observation. ``clean_depth_rmse_mm`` and ``clean_shape_rmse_deg`` restrict
    the same errors to the uncorrupted ones.
    """
    X = np.asarray(points, dtype=np.float64)
    N = np.asarray(normals, dtype=np.float64)
    predicted = np.asarray(inliers, dtype=bool)
    Y = np.asarray(truth_points, dtype=np.float64)
    G = np.asarray(truth_normals, dtype=np.float64)
    bad = np.asarray(corrupted, dtype=bool)
    seen = np.asarray(visible, dtype=bool)
    if X.shape != Y.shape or predicted.shape != bad.shape or X.shape[:2] != seen.shape:
        raise DomainError(
            f"reconstruction {X.shape[:2]} and ground truth {Y.shape[:2]} do not match",
        )

    truth = ~bad & seen
    tp = int(np.count_nonzero(predicted & truth))
    fp = int(np.count_nonzero(predicted & ~truth & seen))
    fn = int(np.count_nonzero(~predicted & truth))
    tn = int(np.count_nonzero(~predicted & ~truth & seen))

    finite = np.all(np.isfinite(X), axis=-1) & seen
    mask = predicted & finite
    if not mask.any():
        mask = finite
    if not mask.any():
        logger.warning("nothing to evaluate: the reconstruction is empty")
        nan = float("nan")
        count = X.shape[0]
        return EvalReport(
            depth_rmse_mm=nan,
            shape_rmse_deg=nan,
            per_image_depth_mm=(nan,) * count,
            per_image_shape_deg=(nan,) * count,
            tp=tp,
            tn=tn,
            fp=fp,
            fn=fn,
            scale=nan,
            evaluated=0,
            failed=True,
        )

    scale, shift = align_similarity(X[mask], Y[mask])
    aligned = scale * X + shift
    depth_err = np.linalg.norm(aligned - Y, axis=-1) * units
    normal_mask = mask & np.all(np.isfinite(N), axis=-1)
    angles = np.full(mask.shape, np.nan)
    angles[normal_mask] = angle_between(N[normal_mask], G[normal_mask])

    per_depth = tuple(_rmse(depth_err[i][mask[i]]) for i in range(len(mask)))
    per_shape = tuple(_rmse(angles[i][normal_mask[i]]) for i in range(len(mask)))
    return EvalReport(
        depth_rmse_mm=_rmse(depth_err[mask]),
        shape_rmse_deg=_rmse(angles[normal_mask]),
        per_image_depth_mm=per_depth,
        per_image_shape_deg=per_shape,
        tp=tp,
        tn=tn,
        fp=fp,
        fn=fn,
        scale=scale,
        evaluated=int(np.count_nonzero(mask)),
        clean_depth_rmse_mm=_rmse(depth_err[mask & ~bad]),
        clean_shape_rmse_deg=_rmse(angles[normal_mask & ~bad]),
    )


def evaluate(reconstruction: Reconstruction, scene: SyntheticScene) -> EvalReport:
    report = score(
        reconstruction.points,
        reconstruction.normals,
        reconstruction.inliers,
        scene.points3d,
        scene.normals,
        scene.corrupted,
        scene.visible,
    )
    return dataclasses.replace(report, timings=dict(reconstruction.timings))


@dataclasses.dataclass(frozen=True)
class SweepRow:
    sweep: str
    value: str
    seeds: int
    depth_rmse_mm: float
    shape_rmse_deg: float
    tpr: float
    tnr: float
    fpr: float
    fnr: float
    failed: int

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def _sweep_params(
    kind: str,
    value: Any,
    base: CylinderParams,
    config: PipelineConfig,
) -> tuple[CylinderParams, PipelineConfig, str]:
    if kind == "contamination":
        return dataclasses.replace(base, error_fraction=float(value)), config, f"{value:g}"
    if kind == "magnitude":
        lo, hi = value
        params = dataclasses.replace(base, error_magnitude=(float(lo), float(hi)))
        return params, config, f"{lo:g}-{hi:g}"
    if kind == "subset-size":
        size, missing = value
        params = dataclasses.replace(
            base,
            n_images=max(base.n_images, int(size)),
            missing_fraction=float(missing),
        )
        return params, config.replace(subset_size=int(size)), f"M={size},missing={missing:g}"
    raise DomainError(f"unknown sweep {kind!r}, expected one of {SWEEPS}")


DEFAULT_VALUES: dict[str, tuple[Any, ...]] = {
    "contamination": (0.0, 0.1, 0.2, 0.3, 0.4, 0.5),
    "magnitude": ((26, 50), (51, 75), (76, 100)),
    "subset-size": ((5, 0.0), (7, 0.0), (10, 0.0), (5, 0.3), (7, 0.3), (10, 0.3)),
}


def run_sweep(
    kind: str,
    values: Sequence[Any] | None = None,
    *,
    seeds: Iterable[int] = (0,),
    params: CylinderParams | None = None,
    config: PipelineConfig | None = None,
) -> list[SweepRow]:
    """One row per sweep value, metrics averaged over ``seeds``.

    The magnitude sweep runs at 50% contamination unless ``params`` sets a
    contamination level of its own.
    """
    if kind not in SWEEPS:
        raise DomainError(f"unknown sweep {kind!r}, expected one of {SWEEPS}")
    base = params or CylinderParams()
    if kind == "magnitude" and params is None:
        base = dataclasses.replace(base, error_fraction=0.5)
    config = config or PipelineConfig()
    seed_list = list(seeds)
    rows = []
    for value in DEFAULT_VALUES.get(kind, ()) if values is None else values:
        scene_params, run_config, label = _sweep_params(kind, value, base, config)
        reports = []
        for seed in seed_list:
            scene, data = generate_cylinder(scene_params, seed)
            result = run_pipeline(data, run_config.replace(seed=seed))
            reports.append(evaluate(result, scene))
        logger.info("sweep %s=%s done over %d seeds", kind, label, len(seed_list))
        ok = [r for r in reports if not r.failed]

        def mean(attr: str, ok: list[EvalReport] = ok) -> float:
            vals = [getattr(r, attr) for r in ok]
            vals = [v for v in vals if np.isfinite(v)]
            return float(np.mean(vals)) if vals else float("nan")

        rows.append(
            SweepRow(
                sweep=kind,
                value=label,
                seeds=len(seed_list),
                depth_rmse_mm=mean("depth_rmse_mm"),
                shape_rmse_deg=mean("shape_rmse_deg"),
                tpr=mean("tpr"),
                tnr=mean("tnr"),
                fpr=mean("fpr"),
                fnr=mean("fnr"),
                failed=len(reports) - len(ok),
            ),
        )
    return rows
