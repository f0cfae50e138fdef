# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""On-disk formats.

Correspondence file: ``#``-prefixed ``key value`` header lines (``format``,
``images``, ``tracks``, ``intrinsics``) followed by whitespace separated rows
``track_id image_id px py``. Ids are 1-based and a missing row means the
track is invisible in that image. Clouds are PLY with one vertex per
reconstructed point, written as ASCII through ``plyfile``. Reports are JSON
and sweep series are CSV.

Correspondence floats are written with ``repr`` so reading a file and writing
it back gives the same bytes.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import os
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import orjson
import plyfile
from numpy.typing import ArrayLike, NDArray

from .config import dumps_json
from .errors import DatasetFormatError
from .geometry import CameraIntrinsics
from .synthetic import CorrespondenceSet, SyntheticScene

__all__ = (
    "CORRESPONDENCE_FILE",
    "FORMAT_VERSION",
    "INTRINSICS_FILE",
    "LABELS_FILE",
    "REPORT_FILE",
    "TRUTH_DIR",
    "VERTEX_DTYPE",
    "CloudSet",
    "GroundTruth",
    "PlyCloud",
    "read_clouds",
    "read_correspondences",
    "read_ground_truth",
    "read_intrinsics",
    "read_json",
    "read_labels",
    "read_ply",
    "write_clouds",
    "write_correspondences",
    "write_dataset",
    "write_intrinsics",
    "write_json",
    "write_labels",
    "write_ply",
    "write_sweep_csv",
)

FORMAT_VERSION = 1
CORRESPONDENCE_FILE = "correspondences.txt"
INTRINSICS_FILE = "intrinsics.json"
LABELS_FILE = "labels.csv"
REPORT_FILE = "report.json"
TRUTH_DIR = "truth"
SCENE_FILE = "scene.json"

VERTEX_DTYPE = np.dtype(
    [
        ("track_id", "i4"),
        ("x", "f8"),
        ("y", "f8"),
        ("z", "f8"),
        ("nx", "f8"),
        ("ny", "f8"),
        ("nz", "f8"),
        ("inlier", "u1"),
    ],
)


def _num(value: Any) -> str:
    return repr(float(value))


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    # newline="" keeps "\n" on every platform
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _read_lines(path: str | os.PathLike[str]) -> list[str]:
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as exc:
        raise DatasetFormatError("file not found", os.fspath(path)) from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetFormatError(f"cannot read file: {exc}", os.fspath(path)) from exc


def write_intrinsics(path: str | os.PathLike[str], K: CameraIntrinsics) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(dumps_json(K.to_mapping()))
    return out


def read_intrinsics(path: str | os.PathLike[str]) -> CameraIntrinsics:
    name = os.fspath(path)
    try:
        values = orjson.loads(Path(path).read_bytes())
    except FileNotFoundError as exc:
        raise DatasetFormatError("missing intrinsics file", name) from exc
    except OSError as exc:
        raise DatasetFormatError(f"cannot read intrinsics: {exc}", name) from exc
    except orjson.JSONDecodeError as exc:
        raise DatasetFormatError(exc.msg, name, exc.lineno) from exc
    if not isinstance(values, dict):
        raise DatasetFormatError("intrinsics must be a JSON object", name)
    try:
        return CameraIntrinsics.from_mapping(values)
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"invalid intrinsics: {exc}", name) from exc


def write_correspondences(
    path: str | os.PathLike[str],
    data: CorrespondenceSet,
    intrinsics_name: str = INTRINSICS_FILE,
) -> Path:
    lines = [
        f"# format {FORMAT_VERSION}",
        f"# images {data.n_images}",
        f"# tracks {data.n_tracks}",
        f"# intrinsics {intrinsics_name}",
    ]
    for j in range(data.n_tracks):
        for i in np.flatnonzero(data.visible[:, j]):
            px, py = data.pixels[i, j]
            lines.append(f"{j + 1} {i + 1} {_num(px)} {_num(py)}")
    return _write_text(Path(path), "\n".join(lines) + "\n")


def read_correspondences(
    path: str | os.PathLike[str],
    intrinsics: CameraIntrinsics | None = None,
) -> CorrespondenceSet:
    """Parse a correspondence file.

    Without ``intrinsics`` the header's ``intrinsics`` entry is resolved
    relative to the file.
    """
    name = os.fspath(path)
    lines = _read_lines(path)
    header: dict[str, str] = {}
    rows: list[tuple[int, int, int, float, float]] = []
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#"):
            key, _, value = text[1:].strip().partition(" ")
            header[key] = value.strip()
            continue
        parts = text.split()
        if len(parts) != 4:
            raise DatasetFormatError(f"expected 4 fields, got {len(parts)}", name, lineno)
        try:
            track, image = int(parts[0]), int(parts[1])
            px, py = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise DatasetFormatError(f"malformed row: {exc}", name, lineno) from exc
        rows.append((lineno, track, image, px, py))

    for key in ("format", "images", "tracks"):
        if key not in header:
            raise DatasetFormatError(f"missing header entry {key!r}", name)
    try:
        version = int(header["format"])
        n_images, n_tracks = int(header["images"]), int(header["tracks"])
    except ValueError as exc:
        raise DatasetFormatError(f"malformed header: {exc}", name) from exc
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported format version {version}", name)

    pixels = np.full((n_images, n_tracks, 2), np.nan)
    visible = np.zeros((n_images, n_tracks), dtype=bool)
    for lineno, track, image, px, py in rows:
        if not 1 <= track <= n_tracks:
            raise DatasetFormatError(f"track id {track} outside [1, {n_tracks}]", name, lineno)
        if not 1 <= image <= n_images:
            raise DatasetFormatError(f"image id {image} outside [1, {n_images}]", name, lineno)
        if visible[image - 1, track - 1]:
            raise DatasetFormatError(
                f"duplicate row for track {track}, image {image}", name, lineno,
            )
        if not (np.isfinite(px) and np.isfinite(py)):
            raise DatasetFormatError("non-finite pixel coordinate", name, lineno)
        pixels[image - 1, track - 1] = (px, py)
        visible[image - 1, track - 1] = True

    if intrinsics is None:
        ref = header.get("intrinsics", INTRINSICS_FILE)
        intrinsics = read_intrinsics(Path(path).parent / ref)
    return CorrespondenceSet(pixels=pixels, visible=visible, intrinsics=intrinsics)


@dataclasses.dataclass(frozen=True)
class PlyCloud:
    track_ids: NDArray[np.intp]
    points: NDArray[np.float64]
    normals: NDArray[np.float64]
    inlier: NDArray[np.bool_]
    comments: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.track_ids)


def write_ply(
    path: str | os.PathLike[str],
    track_ids: ArrayLike,
    points: ArrayLike,
    normals: ArrayLike,
    inlier: ArrayLike,
    comments: Iterable[str] = (),
) -> Path:
    ids = np.asarray(track_ids, dtype=np.intp)
    X = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    N = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    flags = np.asarray(inlier, dtype=bool)
    vertex = np.empty(len(ids), dtype=VERTEX_DTYPE)
    vertex["track_id"] = ids
    for axis, name in enumerate("xyz"):
        vertex[name] = X[:, axis]
        vertex[f"n{name}"] = N[:, axis]
    vertex["inlier"] = flags
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    ply = plyfile.PlyData(
        [plyfile.PlyElement.describe(vertex, "vertex")],
        text=True,
        comments=list(comments),
    )
    ply.write(os.fspath(out))
    return out


def read_ply(path: str | os.PathLike[str]) -> PlyCloud:
    """Read a cloud written by :func:`write_ply`, in ASCII or binary PLY."""
    name = os.fspath(path)
    try:
        ply = plyfile.PlyData.read(name)
    except FileNotFoundError as exc:
        raise DatasetFormatError("file not found", name) from exc
    except plyfile.PlyParseError as exc:
        lineno = getattr(exc, "line", None)
        raise DatasetFormatError(f"malformed PLY: {exc}", name, lineno) from exc
    except (OSError, ValueError) as exc:
        raise DatasetFormatError(f"cannot read PLY: {exc}", name) from exc
    if "vertex" not in ply:
        raise DatasetFormatError("PLY file has no vertex element", name)
    data = ply["vertex"].data
    props = list(data.dtype.names or ())
    if props != list(VERTEX_DTYPE.names or ()):
        raise DatasetFormatError(f"unexpected vertex properties {props}", name)
    return PlyCloud(
        track_ids=data["track_id"].astype(np.intp),
        points=np.column_stack([data[c] for c in "xyz"]).astype(np.float64),
        normals=np.column_stack([data[f"n{c}"] for c in "xyz"]).astype(np.float64),
        inlier=data["inlier"].astype(bool),
        comments=tuple(ply.comments),
    )


def _cloud_name(image: int) -> str:
    return f"cloud_{image + 1:03d}.ply"


def write_clouds(
    directory: str | os.PathLike[str],
    points: NDArray[np.float64],
    normals: NDArray[np.float64],
    inliers: NDArray[np.bool_],
) -> list[Path]:
    """One PLY per image holding its reconstructed points."""
    root = Path(directory)
    out = []
    for i in range(points.shape[0]):
        mask = np.all(np.isfinite(points[i]), axis=1)
        tracks = np.flatnonzero(mask)
        out.append(
            write_ply(
                root / _cloud_name(i),
                tracks + 1,
                points[i, mask],
                np.nan_to_num(normals[i, mask]),
                inliers[i, mask],
                comments=(f"image {i + 1}",),
            ),
        )
    return out


@dataclasses.dataclass(frozen=True)
class CloudSet:
    points: NDArray[np.float64]
    normals: NDArray[np.float64]
    inliers: NDArray[np.bool_]


def read_clouds(directory: str | os.PathLike[str], n_images: int, n_tracks: int) -> CloudSet:
    """Read per-image PLY files back into ``[image, track]`` arrays."""
    root = Path(directory)
    points = np.full((n_images, n_tracks, 3), np.nan)
    normals = np.full((n_images, n_tracks, 3), np.nan)
    inliers = np.zeros((n_images, n_tracks), dtype=bool)
    for i in range(n_images):
        path = root / _cloud_name(i)
        cloud = read_ply(path)
        bad = (cloud.track_ids < 1) | (cloud.track_ids > n_tracks)
        if bad.any():
            raise DatasetFormatError(
                f"track id {int(cloud.track_ids[bad][0])} is not in the ground truth",
                os.fspath(path),
            )
        idx = cloud.track_ids - 1
        points[i, idx] = cloud.points
        normals[i, idx] = cloud.normals
        inliers[i, idx] = cloud.inlier
    return CloudSet(points, normals, inliers)


def write_labels(
    path: str | os.PathLike[str],
    corrupted: NDArray[np.bool_],
    visible: NDArray[np.bool_],
) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("track_id", "image_id", "corrupted"))
    for j in range(corrupted.shape[1]):
        for i in np.flatnonzero(visible[:, j]):
            writer.writerow((j + 1, int(i) + 1, int(corrupted[i, j])))
    return _write_text(Path(path), buf.getvalue())


def read_labels(path: str | os.PathLike[str], n_images: int, n_tracks: int) -> NDArray[np.bool_]:
    name = os.fspath(path)
    lines = _read_lines(path)
    corrupted = np.zeros((n_images, n_tracks), dtype=bool)
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != ["track_id", "image_id", "corrupted"]:
        raise DatasetFormatError("unexpected label header", name, 1)
    for lineno, row in enumerate(reader, start=2):
        try:
            track, image, flag = (int(v) for v in row)
        except ValueError as exc:
            raise DatasetFormatError(f"malformed label row: {exc}", name, lineno) from exc
        if not (1 <= track <= n_tracks and 1 <= image <= n_images):
            raise DatasetFormatError(f"ids ({track}, {image}) out of range", name, lineno)
        corrupted[image - 1, track - 1] = bool(flag)
    return corrupted


def write_json(path: str | os.PathLike[str], payload: Any) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(dumps_json(payload))
    return out


def read_json(path: str | os.PathLike[str]) -> Any:
    name = os.fspath(path)
    try:
        return orjson.loads(Path(path).read_bytes())
    except FileNotFoundError as exc:
        raise DatasetFormatError("file not found", name) from exc
    except orjson.JSONDecodeError as exc:
        raise DatasetFormatError(exc.msg, name, exc.lineno) from exc


def write_sweep_csv(path: str | os.PathLike[str], rows: Sequence[Mapping[str, Any]]) -> Path:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})
    return _write_text(Path(path), buf.getvalue())


def _cell(value: Any) -> Any:
    if isinstance(value, float):
        return "" if not np.isfinite(value) else repr(value)
    return value


def write_dataset(
    directory: str | os.PathLike[str],
    scene: SyntheticScene,
    data: CorrespondenceSet,
) -> Path:
    """Correspondences, intrinsics, labels and ground-truth clouds of a scene."""
    root = Path(directory)
    write_intrinsics(root / INTRINSICS_FILE, data.intrinsics)
    write_correspondences(root / CORRESPONDENCE_FILE, data)
    write_labels(root / LABELS_FILE, scene.corrupted, data.visible)
    truth = np.where(data.visible[..., None], scene.points3d, np.nan)
    write_clouds(root / TRUTH_DIR, truth, scene.normals, ~scene.corrupted)
    params = dataclasses.asdict(scene.params)
    params["intrinsics"] = scene.intrinsics.to_mapping()
    write_json(root / SCENE_FILE, {"seed": scene.seed, "params": params})
    return root


@dataclasses.dataclass(frozen=True)
class GroundTruth:
    correspondences: CorrespondenceSet
    points: NDArray[np.float64]
    normals: NDArray[np.float64]
    corrupted: NDArray[np.bool_]


def read_ground_truth(directory: str | os.PathLike[str]) -> GroundTruth:
    root = Path(directory)
    data = read_correspondences(root / CORRESPONDENCE_FILE)
    clouds = read_clouds(root / TRUTH_DIR, data.n_images, data.n_tracks)
    corrupted = read_labels(root / LABELS_FILE, data.n_images, data.n_tracks)
    return GroundTruth(data, clouds.points, clouds.normals, corrupted)
