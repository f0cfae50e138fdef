# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

import numpy as np
import plyfile
import pytest

import isorecon
from isorecon.formats import (
    CORRESPONDENCE_FILE,
    INTRINSICS_FILE,
    LABELS_FILE,
    VERTEX_DTYPE,
    read_clouds,
    read_correspondences,
    read_ground_truth,
    read_intrinsics,
    read_json,
    read_labels,
    read_ply,
    write_clouds,
    write_correspondences,
    write_dataset,
    write_intrinsics,
    write_json,
    write_labels,
    write_ply,
    write_sweep_csv,
)
from isorecon.synthetic import CylinderParams

PARAMS = CylinderParams(n_images=4, n_points=30, missing_fraction=0.2, error_fraction=0.1)

HEADER = "# format 1\n# images 2\n# tracks 3\n# intrinsics intrinsics.json\n"


@pytest.fixture
def dataset():
    return isorecon.generate_cylinder(PARAMS, 0)


def _write(tmp_path, body, header=HEADER):
    path = tmp_path / CORRESPONDENCE_FILE
    path.write_text(header + body)
    return path


class TestCorrespondences:
    def test_roundtrip(self, tmp_path, dataset):
        """
        Reading a written file and writing it back gives the same bytes
        """
        _, data = dataset
        write_intrinsics(tmp_path / INTRINSICS_FILE, data.intrinsics)
        first = write_correspondences(tmp_path / CORRESPONDENCE_FILE, data)
        loaded = read_correspondences(first)
        np.testing.assert_array_equal(loaded.visible, data.visible)
        np.testing.assert_array_equal(loaded.pixels[data.visible], data.pixels[data.visible])
        assert loaded.intrinsics == data.intrinsics
        second = write_correspondences(tmp_path / "again.txt", loaded)
        assert first.read_bytes() == second.read_bytes()

    def test_missing_rows_invisible(self, tmp_path, dataset):
        _, data = dataset
        path = _write(tmp_path, "1 1 10.0 20.0\n3 2 30.0 40.0\n")
        loaded = read_correspondences(path, data.intrinsics)
        assert loaded.visible.tolist() == [[True, False, False], [False, False, True]]
        assert np.isnan(loaded.pixels[0, 1]).all()

    @pytest.mark.parametrize(
        "body,lineno,message",
        [
            ("1 1 10.0\n", 5, "expected 4 fields"),
            ("1 1 ten 20.0\n", 5, "malformed row"),
            ("4 1 10.0 20.0\n", 5, "track id 4"),
            ("1 3 10.0 20.0\n", 5, "image id 3"),
            ("1 1 10.0 20.0\n\n1 1 11.0 21.0\n", 7, "duplicate row"),
            ("1 1 nan 20.0\n", 5, "non-finite"),
        ],
    )
    def test_bad_rows(self, tmp_path, dataset, body, lineno, message):
        """
        Malformed rows raise DatasetFormatError carrying their line number
        """
        path = _write(tmp_path, body)
        with pytest.raises(isorecon.DatasetFormatError) as info:
            read_correspondences(path, dataset[1].intrinsics)
        assert info.value.lineno == lineno
        assert info.value.path == str(path)
        assert message in info.value.msg
        assert f":{lineno}: " in str(info.value)

    def test_bad_version(self, tmp_path, dataset):
        path = _write(tmp_path, "", header=HEADER.replace("format 1", "format 2"))
        with pytest.raises(isorecon.DatasetFormatError, match="format version 2"):
            read_correspondences(path, dataset[1].intrinsics)

    def test_missing_header(self, tmp_path, dataset):
        path = _write(tmp_path, "", header="# format 1\n# images 2\n")
        with pytest.raises(isorecon.DatasetFormatError, match="'tracks'"):
            read_correspondences(path, dataset[1].intrinsics)

    def test_missing_intrinsics(self, tmp_path):
        """
        The intrinsics named in the header must exist next to the file
        """
        path = _write(tmp_path, "1 1 10.0 20.0\n")
        with pytest.raises(isorecon.DatasetFormatError) as info:
            read_correspondences(path)
        assert info.value.msg == "missing intrinsics file"
        assert info.value.path == str(tmp_path / INTRINSICS_FILE)

    def test_missing_file(self, tmp_path):
        with pytest.raises(isorecon.DatasetFormatError, match="file not found"):
            read_correspondences(tmp_path / "absent.txt")


class TestIntrinsics:
    def test_roundtrip(self, tmp_path, dataset):
        K = dataset[1].intrinsics
        assert read_intrinsics(write_intrinsics(tmp_path / "K.json", K)) == K

    def test_invalid(self, tmp_path):
        path = tmp_path / "K.json"
        path.write_bytes(b'{"fx": 500.0}')
        with pytest.raises(isorecon.DatasetFormatError, match="invalid intrinsics"):
            read_intrinsics(path)

    def test_not_json(self, tmp_path):
        path = tmp_path / "K.json"
        path.write_bytes(b"{\n  fx")
        with pytest.raises(isorecon.DatasetFormatError) as info:
            read_intrinsics(path)
        assert info.value.lineno == 2


class TestPly:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        ids = np.array([1, 4, 9])
        points = rng.normal(size=(3, 3))
        normals = rng.normal(size=(3, 3))
        flags = np.array([True, False, True])
        path = write_ply(tmp_path / "c.ply", ids, points, normals, flags, comments=("image 1",))
        cloud = read_ply(path)
        assert len(cloud) == 3
        np.testing.assert_array_equal(cloud.track_ids, ids)
        np.testing.assert_array_equal(cloud.points, points)
        np.testing.assert_array_equal(cloud.normals, normals)
        np.testing.assert_array_equal(cloud.inlier, flags)
        assert cloud.comments == ("image 1",)

    def test_header(self, tmp_path):
        path = write_ply(tmp_path / "c.ply", [1], [[0.0, 0.0, 1.0]], [[0.0, 0.0, 1.0]], [True])
        lines = path.read_text().splitlines()
        assert lines[:3] == ["ply", "format ascii 1.0", "element vertex 1"]
        assert "end_header" in lines

    def test_binary_accepted(self, tmp_path):
        """
        read_ply() also reads a binary cloud with the same vertex properties
        """
        vertex = np.zeros(2, dtype=VERTEX_DTYPE)
        vertex["track_id"] = [3, 7]
        vertex["z"] = [0.5, 0.75]
        vertex["inlier"] = [1, 0]
        path = tmp_path / "c.ply"
        plyfile.PlyData([plyfile.PlyElement.describe(vertex, "vertex")]).write(str(path))
        cloud = read_ply(path)
        np.testing.assert_array_equal(cloud.track_ids, [3, 7])
        np.testing.assert_array_equal(cloud.points[:, 2], [0.5, 0.75])
        np.testing.assert_array_equal(cloud.inlier, [True, False])

    def test_foreign_properties(self, tmp_path):
        """
        A PLY without the track and inlier properties is rejected
        """
        vertex = np.zeros(2, dtype=[("x", "f4"), ("y", "f4"), ("z", "f4")])
        path = tmp_path / "c.ply"
        element = plyfile.PlyElement.describe(vertex, "vertex")
        plyfile.PlyData([element], text=True).write(str(path))
        with pytest.raises(isorecon.DatasetFormatError, match="unexpected vertex properties"):
            read_ply(path)

    def test_not_ply(self, tmp_path):
        path = tmp_path / "c.ply"
        path.write_text("solid mesh\n")
        with pytest.raises(isorecon.DatasetFormatError, match="malformed PLY"):
            read_ply(path)

    def test_truncated(self, tmp_path):
        path = write_ply(tmp_path / "c.ply", [1, 2], np.zeros((2, 3)), np.zeros((2, 3)), [1, 1])
        path.write_text("\n".join(path.read_text().splitlines()[:-1]) + "\n")
        with pytest.raises(isorecon.DatasetFormatError, match="malformed PLY"):
            read_ply(path)

    def test_clouds(self, tmp_path, dataset):
        """
        write_clouds() skips missing points and read_clouds() puts them back in place
        """
        scene, data = dataset
        points = np.where(data.visible[..., None], scene.points3d, np.nan)
        inliers = ~scene.corrupted & data.visible
        paths = write_clouds(tmp_path, points, scene.normals, inliers)
        assert [p.name for p in paths] == [f"cloud_00{i}.ply" for i in range(1, 5)]
        clouds = read_clouds(tmp_path, data.n_images, data.n_tracks)
        np.testing.assert_array_equal(clouds.points, points)
        np.testing.assert_array_equal(clouds.inliers, inliers)

    def test_unknown_track(self, tmp_path, dataset):
        """
        A cloud naming a track the ground truth does not have is rejected
        """
        scene, data = dataset
        write_clouds(tmp_path, scene.points3d, scene.normals, data.visible)
        with pytest.raises(isorecon.DatasetFormatError, match="not in the ground truth"):
            read_clouds(tmp_path, data.n_images, data.n_tracks - 1)


class TestLabels:
    def test_roundtrip(self, tmp_path, dataset):
        scene, data = dataset
        path = write_labels(tmp_path / LABELS_FILE, scene.corrupted, data.visible)
        corrupted = read_labels(path, data.n_images, data.n_tracks)
        np.testing.assert_array_equal(corrupted, scene.corrupted)

    def test_out_of_range(self, tmp_path):
        path = tmp_path / LABELS_FILE
        path.write_text("track_id,image_id,corrupted\n1,1,0\n5,1,1\n")
        with pytest.raises(isorecon.DatasetFormatError) as info:
            read_labels(path, 2, 4)
        assert info.value.lineno == 3


class TestDataset:
    def test_ground_truth(self, tmp_path, dataset):
        """
        write_dataset() and read_ground_truth() carry the scene through disk
        """
        scene, data = dataset
        write_dataset(tmp_path, scene, data)
        truth = read_ground_truth(tmp_path)
        seen = data.visible
        np.testing.assert_array_equal(truth.correspondences.visible, seen)
        np.testing.assert_array_equal(truth.points[seen], scene.points3d[seen])
        np.testing.assert_array_equal(truth.normals[seen], scene.normals[seen])
        np.testing.assert_array_equal(truth.corrupted, scene.corrupted)
        assert np.isnan(truth.points[~seen]).all()
        assert read_json(tmp_path / "scene.json")["seed"] == 0


class TestJson:
    def test_roundtrip(self, tmp_path):
        payload = {"b": [1.5, None], "a": np.arange(3)}
        path = write_json(tmp_path / "r.json", payload)
        assert path.read_bytes().startswith(b'{\n  "a"')
        assert read_json(path) == {"a": [0, 1, 2], "b": [1.5, None]}

    def test_sweep_csv(self, tmp_path):
        path = write_sweep_csv(
            tmp_path / "s.csv",
            [{"value": "0.1", "tpr": 0.5, "fpr": float("nan")}],
        )
        assert path.read_text() == "value,tpr,fpr\n0.1,0.5,\n"
