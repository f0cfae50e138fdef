# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""End-to-end reconstruction.

Images are split into subsets. Inside a subset a warp is fitted for every
ordered image pair, every correspondence is reconstructed against the
reference its images agree on, and each image's shape field is integrated
into an up-to-scale cloud. The clouds of all images are then brought to a
common scale and every correspondence is labelled by how well its neighbour
distances are preserved.
"""

from __future__ import annotations

import dataclasses
import functools
import itertools
import logging
import time
from collections.abc import Callable, Iterable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Any, TypeVar

import numpy as np
from numpy.typing import NDArray

from .config import PipelineConfig
from .errors import DomainError, IllPosedWarpError, IsoReconError, UnreconstructableError
from .geometry import CameraIntrinsics, NormalizedPoint
from .integration import GradientField, integrate
from .isometry import (
    InlierLabels,
    PointLabel,
    ScaleSet,
    build_nng,
    classify_inliers,
    distance_profiles,
    pairwise_scale_ratios,
    propagate_scales,
    rescale_profiles,
)
from .multiref import select_reference
from .normals import TrackObservations, estimate_normals
from .synthetic import CorrespondenceSet
from .warp import InlierRecord, PairDifferentials, Warp, fit_warp, robust_fit_mad

__all__ = (
    "FailureRecord",
    "Reconstruction",
    "SubsetPlan",
    "fit_subset_warps",
    "mad_delta",
    "plan_subsets",
    "run_pipeline",
)

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

MIN_TRACK_IMAGES = 3


@dataclasses.dataclass(frozen=True)
class SubsetPlan:
    """Image subsets and, per subset, the images allowed to act as reference."""

    subsets: tuple[tuple[int, ...], ...]
    references: tuple[tuple[int, ...], ...]
    baseline: str = "wide"

    def __post_init__(self) -> None:
        if len(self.subsets) != len(self.references):
            raise DomainError("one reference list is needed per subset")
        for subset, refs in zip(self.subsets, self.references):
            if len(subset) < 3:
                raise DomainError("subsets need at least 3 images")
            if not refs or not set(refs) <= set(subset):
                raise DomainError("references must be a non-empty part of their subset")

    def __len__(self) -> int:
        return len(self.subsets)

    def __iter__(self) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
        return iter(zip(self.subsets, self.references))

    def covers(self, n_images: int) -> bool:
        return set(itertools.chain.from_iterable(self.subsets)) == set(range(n_images))


def _chunks(count: int, size: int) -> list[tuple[int, ...]]:
    if count <= size:
        return [tuple(range(count))]
    starts = list(range(0, count - size + 1, size))
    if starts[-1] + size < count:
        # the last subset overlaps its predecessor instead of running short
        starts.append(count - size)
    return [tuple(range(s, s + size)) for s in starts]


def plan_subsets(n_images: int, config: PipelineConfig | None = None) -> SubsetPlan:
    config = config or PipelineConfig()
    if n_images < 3:
        raise DomainError(f"reconstruction needs at least 3 images, got {n_images}")
    if config.baseline == "short":
        size = config.short_baseline_size
        n_refs: int | None = config.short_baseline_references
    else:
        size = config.subset_size
        n_refs = None
    subsets = _chunks(n_images, size)
    references = []
    for subset in subsets:
        if n_refs is None or n_refs >= len(subset):
            references.append(subset)
            continue
        picks = np.unique(np.round(np.linspace(0, len(subset) - 1, n_refs)).astype(int))
        references.append(tuple(subset[i] for i in picks))
    return SubsetPlan(tuple(subsets), tuple(references), config.baseline)


@dataclasses.dataclass(frozen=True)
class FailureRecord:
    stage: str
    error: str
    message: str
    track_id: int | None = None
    images: tuple[int, ...] = ()

    @classmethod
    def from_exception(
        cls,
        stage: str,
        exc: BaseException,
        *,
        track_id: int | None = None,
        images: Iterable[int] = (),
    ) -> FailureRecord:
        return cls(
            stage=stage,
            error=type(exc).__name__,
            message=str(exc),
            track_id=track_id,
            images=tuple(int(i) for i in images),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage,
            "error": self.error,
            "message": self.message,
            "track_id": self.track_id,
            "images": list(self.images),
        }


def _map(fn: Callable[[T], R], items: Sequence[T], threads: int) -> list[R]:
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, items))


def mad_delta(config: PipelineConfig, K: CameraIntrinsics) -> float:
    """MAD convergence threshold in normalized units, a fraction of the image diagonal."""
    return config.mad_delta_fraction * K.diagonal / K.focal


def fit_subset_warps(
    points: NDArray[np.float64],
    visible: NDArray[np.bool_],
    subset: Sequence[int],
    config: PipelineConfig,
    delta: float,
) -> tuple[dict[tuple[int, int], Warp], dict[tuple[int, int], InlierRecord], list[FailureRecord]]:
    """Fit the warp of every ordered image pair of ``subset``.

    ``points[i, j]`` is track ``j`` in image ``i`` in normalized coordinates.
    Warps are keyed by global image indices ``(source, destination)``.
    """

    def fit(pair: tuple[int, int]):
        k, t = pair
        common = visible[k] & visible[t]
        src, dst = points[k, common], points[t, common]
        try:
            if config.use_mad:
                warp, record = robust_fit_mad(src, dst, config.warp_lambda, delta)
            else:
                warp, record = fit_warp(src, dst, lam=config.warp_lambda), None
        except (DomainError, IllPosedWarpError) as exc:
            logger.warning("no warp for images %d -> %d: %s", k, t, exc)
            return pair, None, None, FailureRecord.from_exception("warp", exc, images=pair)
        return pair, warp, record, None

    warps: dict[tuple[int, int], Warp] = {}
    records: dict[tuple[int, int], InlierRecord] = {}
    failures: list[FailureRecord] = []
    for pair, warp, record, failure in _map(
        fit,
        list(itertools.permutations(subset, 2)),
        config.threads,
    ):
        if warp is not None:
            warps[pair] = warp
        if record is not None:
            records[pair] = record
        if failure is not None:
            failures.append(failure)
    return warps, records, failures


def _hallucinate(
    points: NDArray[np.float64],
    visible: NDArray[np.bool_],
    warps: dict[tuple[int, int], Warp],
    reference: int,
    size: int,
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Grid correspondences over the reference image's bounding box.

    Grid points are carried into the other images through the warps and are
    invisible wherever a warp would extrapolate.
    """
    seen = points[reference, visible[reference]]
    lo, hi = seen.min(axis=0), seen.max(axis=0)
    gu, gv = np.meshgrid(np.linspace(lo[0], hi[0], size), np.linspace(lo[1], hi[1], size))
    grid = np.column_stack((gu.reshape(-1), gv.reshape(-1)))
    out = np.full((len(points), len(grid), 2), np.nan)
    seen_mask = np.zeros((len(points), len(grid)), dtype=bool)
    out[reference] = grid
    seen_mask[reference] = True
    for k in range(len(points)):
        warp = warps.get((reference, k))
        if k == reference or warp is None:
            continue
        inside = warp.contains(grid)
        out[k, inside] = warp.evaluate(grid[inside])
        seen_mask[k, inside] = True
    return out, seen_mask


def _track_differentials(
    points: NDArray[np.float64],
    visible: NDArray[np.bool_],
    subset: Sequence[int],
    warps: dict[tuple[int, int], Warp],
) -> list[dict[tuple[int, int], PairDifferentials]]:
    """Differentials per track, keyed by local image indices."""
    out: list[dict[tuple[int, int], PairDifferentials]] = [{} for _ in range(points.shape[1])]
    for a, b in itertools.permutations(range(len(subset)), 2):
        warp = warps.get((subset[a], subset[b]))
        if warp is None:
            continue
        tracks = np.flatnonzero(visible[a])
        if not len(tracks):
            continue
        values, jacobians, hessians = warp.derivatives(points[a, tracks])
        for i, j in enumerate(tracks):
            out[j][(a, b)] = PairDifferentials(
                J=jacobians[i],
                Hu=hessians[i, 0],
                Hv=hessians[i, 1],
                target=NormalizedPoint(float(points[a, j, 0]), float(points[a, j, 1])),
                warped=NormalizedPoint(float(values[i, 0]), float(values[i, 1])),
            )
    return out


@dataclasses.dataclass(frozen=True)
class _TrackOutcome:
    shapes: NDArray[np.float64]
    normals: NDArray[np.float64]
    surviving: NDArray[np.bool_]
    reference: int | None
    failure: FailureRecord | None = None


def _reconstruct_track(
    track: TrackObservations,
    *,
    references: Sequence[int],
    config: PipelineConfig,
    subset_id: int,
) -> _TrackOutcome:
    # keyed on the track, not on scheduling order
    rng = np.random.default_rng([config.seed, subset_id, track.track_id])
    count = len(track.points)
    empty = _TrackOutcome(
        shapes=np.full((count, 2), np.nan),
        normals=np.full((count, 3), np.nan),
        surviving=np.zeros(count, dtype=bool),
        reference=None,
    )
    if config.use_multi_reference:
        selection = select_reference(
            track,
            config.epsilon_deg,
            config.min_subset,
            solver=config.solver,
            rng=rng,
            flag_factor=config.flag_factor,
            references=references,
        )
        if selection.rejected:
            failure = FailureRecord(
                stage="multi-reference",
                error="UnreconstructableError",
                message="no reference reached consensus",
                track_id=track.track_id,
            )
            return dataclasses.replace(empty, failure=failure)
        surviving = np.zeros(count, dtype=bool)
        surviving[list(selection.surviving)] = True
        return _TrackOutcome(
            shapes=selection.shapes,
            normals=selection.normals,
            surviving=surviving,
            reference=selection.reference,
        )

    reference = next((t for t in references if track.visible[t]), None)
    if reference is None:
        exc = UnreconstructableError("no reference image sees the point")
        return dataclasses.replace(
            empty,
            failure=FailureRecord.from_exception("normals", exc, track_id=track.track_id),
        )
    try:
        est = estimate_normals(track.view(reference), config.solver, rng, config.flag_factor)
    except IsoReconError as exc:
        return dataclasses.replace(
            empty,
            failure=FailureRecord.from_exception("normals", exc, track_id=track.track_id),
        )
    return _TrackOutcome(
        shapes=est.shapes,
        normals=est.normals,
        surviving=est.available,
        reference=reference,
    )


@dataclasses.dataclass(frozen=True)
class Reconstruction:
    """Per-image clouds of one sequence, indexed ``[image, track]``.

    Missing entries are NaN. Clouds share one scale, that of image 0's gauge
    group. ``grid_points`` holds the hallucinated grid clouds when enabled.
    """

    points: NDArray[np.float64]
    normals: NDArray[np.float64]
    shapes: NDArray[np.float64]
    inliers: NDArray[np.bool_]
    labels: NDArray[np.int8]
    references: NDArray[np.intp]
    scales: ScaleSet
    anchor: int
    plan: SubsetPlan
    config: PipelineConfig
    failures: tuple[FailureRecord, ...] = ()
    timings: dict[str, float] = dataclasses.field(default_factory=dict)
    grid_points: NDArray[np.float64] | None = None
    # kNN-graph components per image, 0 where the image was not integrated
    integration_components: NDArray[np.intp] | None = None

    @property
    def n_images(self) -> int:
        return self.points.shape[0]

    @property
    def n_tracks(self) -> int:
        return self.points.shape[1]

    @property
    def reconstructed(self) -> NDArray[np.bool_]:
        return np.all(np.isfinite(self.points), axis=-1)

    def report(self, *, timings: bool = True) -> dict[str, Any]:
        names = {int(label): label.name.lower() for label in PointLabel}
        components = self.integration_components
        out: dict[str, Any] = {
            "config": self.config.to_dict(),
            "seed": self.config.seed,
            "n_images": self.n_images,
            "n_tracks": self.n_tracks,
            "anchor": self.anchor,
            "subsets": [list(s) for s in self.plan.subsets],
            "labels": [names[int(label)] for label in self.labels],
            "references": [int(r) if r >= 0 else None for r in self.references],
            "scales": [None if not np.isfinite(a) else float(a) for a in self.scales.alpha],
            "scale_groups": [int(c) for c in self.scales.components],
            "inlier_observations": int(np.count_nonzero(self.inliers)),
            "reconstructed_observations": int(np.count_nonzero(self.reconstructed)),
            "failures": [f.to_dict() for f in self.failures],
            "integration_components": [] if components is None else components.tolist(),
        }
        if timings:
            out["timings"] = dict(self.timings)
        return out


def _majority(references: NDArray[np.intp], n_images: int) -> int:
    chosen = references[references >= 0]
    if not len(chosen):
        return 0
    return int(np.argmax(np.bincount(chosen, minlength=n_images)))


def _anchor_points(
    points: NDArray[np.float64],
    visible: NDArray[np.bool_],
    anchor: int,
    warps: dict[tuple[int, int], Warp],
    tracks: NDArray[np.intp],
) -> NDArray[np.float64]:
    """Positions of ``tracks`` in the anchor image, carried by a warp where unseen."""
    out = points[anchor].copy()
    for j in tracks[~visible[anchor, tracks]]:
        seen = np.flatnonzero(visible[:, j])
        for k in seen:
            warp = warps.get((int(k), anchor))
            if warp is not None:
                out[j] = warp.evaluate(points[k, j][None])[0]
                break
        else:
            logger.debug("track %d has no warp into anchor image %d", j + 1, anchor)
            out[j] = points[seen[0], j]
    return out[tracks]


def run_pipeline(
    correspondences: CorrespondenceSet,
    config: PipelineConfig | None = None,
) -> Reconstruction:
    """Reconstruct every image of ``correspondences``.

    Per-correspondence failures are recorded in ``Reconstruction.failures``
    and never abort the run.
    """
    config = config or PipelineConfig()
    started = time.perf_counter()
    timings = {"warps": 0.0, "normals": 0.0, "integration": 0.0, "isometry": 0.0}
    K = correspondences.intrinsics
    n_img, n_tracks = correspondences.n_images, correspondences.n_tracks
    points = correspondences.normalized()
    visible = correspondences.visible
    plan = plan_subsets(n_img, config)
    delta = mad_delta(config, K)
    logger.info(
        "reconstructing %d images x %d tracks in %d subsets",
        n_img,
        n_tracks,
        len(plan),
    )

    grid_count = config.grid_size**2 if config.hallucinate_grid else 0
    total = n_tracks + grid_count * len(plan)
    shapes = np.full((n_img, total, 2), np.nan)
    normals = np.full((n_img, total, 3), np.nan)
    surviving = np.zeros((n_img, total), dtype=bool)
    all_points = np.full((n_img, total, 2), np.nan)
    all_points[:, :n_tracks] = points
    references = np.full(n_tracks, -1, dtype=np.intp)
    failures: list[FailureRecord] = []
    all_warps: dict[tuple[int, int], Warp] = {}
    attempted = np.zeros(n_tracks, dtype=bool)

    for subset_id, (subset, refs) in enumerate(plan):
        clock = time.perf_counter()
        warps, _, warp_failures = fit_subset_warps(points, visible, subset, config, delta)
        failures.extend(warp_failures)
        for key, warp in warps.items():
            all_warps.setdefault(key, warp)
        timings["warps"] += time.perf_counter() - clock

        clock = time.perf_counter()
        local_points = points[list(subset)]
        local_visible = visible[list(subset)]
        track_ids = list(range(n_tracks))
        if grid_count:
            local_ref = subset.index(refs[0])
            grid, grid_visible = _hallucinate(
                local_points,
                local_visible,
                {(subset.index(k), subset.index(t)): w for (k, t), w in warps.items()},
                local_ref,
                config.grid_size,
            )
            local_points = np.concatenate((local_points, grid), axis=1)
            local_visible = np.concatenate((local_visible, grid_visible), axis=1)
            offset = n_tracks + subset_id * grid_count
            track_ids.extend(range(offset, offset + grid_count))
            all_points[list(subset), offset : offset + grid_count] = grid

        differentials = _track_differentials(local_points, local_visible, subset, warps)
        local_refs = [subset.index(t) for t in refs]
        counts = local_visible.sum(axis=0)
        jobs = [j for j in range(local_points.shape[1]) if counts[j] >= MIN_TRACK_IMAGES]

        tracks = [
            TrackObservations(
                track_id=track_ids[j] + 1,
                points=local_points[:, j],
                visible=local_visible[:, j],
                differentials=differentials[j],
            )
            for j in jobs
        ]
        solve = functools.partial(
            _reconstruct_track,
            references=local_refs,
            config=config,
            subset_id=subset_id,
        )
        for j, outcome in zip(jobs, _map(solve, tracks, config.threads)):
            g = track_ids[j]
            if g < n_tracks:
                attempted[g] = True
            if outcome.failure is not None:
                if g < n_tracks:
                    failures.append(outcome.failure)
                continue
            for a, k in enumerate(subset):
                if surviving[k, g] or not outcome.surviving[a]:
                    continue
                shapes[k, g] = outcome.shapes[a]
                normals[k, g] = outcome.normals[a]
                surviving[k, g] = np.all(np.isfinite(outcome.shapes[a]))
            if g < n_tracks and references[g] < 0 and outcome.reference is not None:
                references[g] = subset[outcome.reference]
        timings["normals"] += time.perf_counter() - clock
        logger.info("subset %d/%d done", subset_id + 1, len(plan))

    for j in np.flatnonzero(~attempted):
        failures.append(
            FailureRecord(
                stage="normals",
                error="UnreconstructableError",
                message="fewer than 3 images of one subset see the point",
                track_id=int(j) + 1,
            ),
        )

    clock = time.perf_counter()
    clouds = np.full((n_img, total, 3), np.nan)
    components = np.zeros(n_img, dtype=np.intp)
    for i in range(n_img):
        mask = surviving[i] & np.all(np.isfinite(shapes[i]), axis=1)
        if np.count_nonzero(mask) < 3:
            logger.warning("image %d has too few reconstructed points to integrate", i)
            continue
        try:
            surface = integrate(
                GradientField.from_arrays(all_points[i, mask], shapes[i, mask]),
                config.integration_neighbors,
            )
        except (DomainError, ArithmeticError) as exc:
            failures.append(FailureRecord.from_exception("integration", exc, images=(i,)))
            continue
        components[i] = surface.n_components
        if surface.multi_component:
            logger.warning(
                "image %d integrates as %d components with independent scales",
                i,
                surface.n_components,
            )
        clouds[i, mask] = surface.points3d
    timings["integration"] = time.perf_counter() - clock

    clock = time.perf_counter()
    anchor = _majority(references, n_img)
    real = clouds[:, :n_tracks]
    candidates = np.flatnonzero(np.any(np.all(np.isfinite(real), axis=-1), axis=0))
    labels = np.full(n_tracks, PointLabel.OUTLIER, dtype=np.int8)
    alpha = np.ones(n_img)
    scales = ScaleSet(alpha=alpha, components=np.zeros(n_img, dtype=np.intp))
    if len(candidates) >= 2:
        anchor_pts = _anchor_points(points, visible, anchor, all_warps, candidates)
        graph = build_nng(anchor_pts, config.neighbors)
        profiles = distance_profiles(real[:, candidates], graph)
        scales = propagate_scales(pairwise_scale_ratios(profiles), n_img)
        if config.use_isometry_filter:
            result: InlierLabels = classify_inliers(
                rescale_profiles(profiles, scales),
                tolerance=config.inlier_tolerance,
                fraction=config.inlier_fraction,
            )
            labels[candidates] = result.labels
        else:
            labels[candidates] = PointLabel.INLIER
    else:
        labels[candidates] = PointLabel.UNDETERMINED
    timings["isometry"] = time.perf_counter() - clock

    with np.errstate(invalid="ignore"):
        scaled = clouds / scales.alpha[:, None, None]
    real_scaled = scaled[:, :n_tracks]
    inliers = (
        (labels == PointLabel.INLIER)[None]
        & surviving[:, :n_tracks]
        & visible
        & np.all(np.isfinite(real_scaled), axis=-1)
    )
    timings["total"] = time.perf_counter() - started
    logger.info(
        "%d of %d tracks labelled inlier, %d failures recorded",
        int(np.count_nonzero(labels == PointLabel.INLIER)),
        n_tracks,
        len(failures),
    )
    return Reconstruction(
        points=real_scaled,
        normals=normals[:, :n_tracks],
        shapes=shapes[:, :n_tracks],
        inliers=inliers,
        labels=labels,
        references=references,
        scales=scales,
        anchor=anchor,
        plan=plan,
        config=config,
        failures=tuple(failures),
        timings=timings,
        grid_points=scaled[:, n_tracks:] if grid_count else None,
        integration_components=components,
    )
