import math

import numpy as np
import pytest

from boundseg.errors import FormatError, IoError, SpecError
from boundseg.pcio import PointCloud, ShapeSpec, gen_shape, read_labels, read_xyz, write_labels, write_xyz


class TestReadXyz:
    def test_three_fields(self, tmp_path):
        p = tmp_path / "a.xyz"
        p.write_text("0 0 0\n1 0 0\n")
        cloud = read_xyz(p)
        assert cloud.n == 2
        assert cloud.labels is None

    def test_four_fields(self, tmp_path):
        p = tmp_path / "a.xyz"
        p.write_text("0 0 0 1\n1 0 0 0\n")
        cloud = read_xyz(p)
        assert cloud.labels.tolist() == [1, 0]

    def test_non_numeric_field(self, tmp_path):
        p = tmp_path / "a.xyz"
        p.write_text("0 0 x\n")
        with pytest.raises(FormatError) as exc:
            read_xyz(p)
        assert exc.value.line == 1

    def test_mixed_widths_rejected(self, tmp_path):
        p = tmp_path / "a.xyz"
        p.write_text("0 0 0\n1 0 0 2\n")
        with pytest.raises(FormatError) as exc:
            read_xyz(p)
        assert exc.value.line == 2

    def test_comments_and_blanks_skipped(self, tmp_path):
        p = tmp_path / "a.xyz"
        p.write_text("# header\n\n0 0 0\n \n1 1 1\n")
        assert read_xyz(p).n == 2

    def test_scientific_notation(self, tmp_path):
        p = tmp_path / "a.xyz"
        p.write_text("1e-3 2E2 -3.5e+0\n0 0 0\n")
        cloud = read_xyz(p)
        np.testing.assert_allclose(cloud.points[0], [0.001, 200.0, -3.5])

    def test_non_finite_rejected(self, tmp_path):
        p = tmp_path / "a.xyz"
        p.write_text("inf 0 0\n")
        with pytest.raises(FormatError):
            read_xyz(p)

    def test_wrong_field_count(self, tmp_path):
        p = tmp_path / "a.xyz"
        p.write_text("0 0\n")
        with pytest.raises(FormatError):
            read_xyz(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            read_xyz(tmp_path / "nope.xyz")

    def test_empty_file(self, tmp_path):
        p = tmp_path / "a.xyz"
        p.write_text("# only comments\n")
        with pytest.raises(FormatError):
            read_xyz(p)

    def test_negative_label_rejected(self, tmp_path):
        p = tmp_path / "a.xyz"
        p.write_text("0 0 0 -1\n")
        with pytest.raises(FormatError):
            read_xyz(p)

    def test_xyz_round_trip(self, tmp_path):
        cloud = gen_shape(ShapeSpec("cube", 64, 0.05, seed=9))
        p = tmp_path / "c.xyz"
        write_xyz(p, cloud)
        back = read_xyz(p)
        np.testing.assert_array_equal(back.points, cloud.points)
        np.testing.assert_array_equal(back.labels, cloud.labels)


class TestLabels:
    def test_write_format(self, tmp_path):
        p = tmp_path / "l.txt"
        write_labels(p, [0, 2, 1])
        assert p.read_text() == "0\n2\n1\n"

    def test_single(self, tmp_path):
        p = tmp_path / "l.txt"
        write_labels(p, [5])
        assert p.read_text() == "5\n"

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_labels(tmp_path / "l.txt", [])

    def test_round_trip(self, tmp_path):
        p = tmp_path / "l.txt"
        labels = [0, 3, 1, 1, 7, 0]
        write_labels(p, labels)
        assert read_labels(p) == labels

    def test_read_negative(self, tmp_path):
        p = tmp_path / "l.txt"
        p.write_text("-1\n")
        with pytest.raises(FormatError):
            read_labels(p)

    def test_read_empty(self, tmp_path):
        p = tmp_path / "l.txt"
        p.write_text("")
        with pytest.raises(FormatError):
            read_labels(p)


class TestPointCloud:
    def test_requires_points(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((0, 3)))

    def test_label_length_checked(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((2, 3)), labels=np.array([0]))

    def test_label_bound_checked(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((2, 3)), labels=np.array([0, 3]), num_classes=2)

    def test_immutable(self):
        cloud = PointCloud(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            cloud.points[0, 0] = 1.0


class TestGenShape:
    def test_deterministic(self):
        spec = ShapeSpec("cube", 600, 0.0, seed=1)
        a, b = gen_shape(spec), gen_shape(spec)
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_cube_faces(self):
        cloud = gen_shape(ShapeSpec("cube", 600, 0.0, seed=1))
        assert cloud.num_classes == 6
        on_face = np.isin(cloud.points, (0.0, 1.0))
        assert (on_face.sum(axis=1) == 1).all()
        # label identifies which coordinate is pinned and to which side
        for i in range(cloud.n):
            face = int(cloud.labels[i])
            assert cloud.points[i, face >> 1] == float(face & 1)

    def test_cube_on_surface_tolerance(self):
        cloud = gen_shape(ShapeSpec("cube", 512, 0.0, seed=3))
        dist = np.minimum(np.abs(cloud.points), np.abs(cloud.points - 1.0)).min(axis=1)
        assert dist.max() < 1e-12

    def test_planes_construction(self):
        cloud = gen_shape(ShapeSpec("planes", 100, 0.0, seed=7))
        assert cloud.num_classes == 2
        y, z = cloud.points[:, 1], cloud.points[:, 2]
        lab = cloud.labels
        assert ((lab == 0) == (y == 0.0)).all()
        assert ((lab == 1) == ((z == 0.0) & (y != 0.0))).all()

    def test_lbracket_construction(self):
        cloud = gen_shape(ShapeSpec("lbracket", 300, 0.0, seed=2))
        lab = cloud.labels
        floor = cloud.points[lab == 0]
        wall = cloud.points[lab == 1]
        assert (floor[:, 1] == 0.0).all()
        assert (wall[:, 0] == 1.0).all()
        assert wall[:, 1].max() <= 0.5

    def test_noise_perturbs(self):
        a = gen_shape(ShapeSpec("cube", 64, 0.0, seed=1))
        b = gen_shape(ShapeSpec("cube", 64, 0.1, seed=1))
        np.testing.assert_array_equal(a.labels, b.labels)
        assert np.abs(a.points - b.points).max() > 0.01

    def test_unknown_kind(self):
        with pytest.raises(SpecError):
            ShapeSpec("sphere", 100, 0.0, seed=1)

    def test_too_few_points(self):
        with pytest.raises(SpecError):
            ShapeSpec("cube", 4, 0.0, seed=1)

    def test_negative_noise(self):
        with pytest.raises(SpecError):
            ShapeSpec("cube", 100, -0.5, seed=1)

    def test_seed_changes_cloud(self):
        a = gen_shape(ShapeSpec("cube", 64, 0.0, seed=1))
        b = gen_shape(ShapeSpec("cube", 64, 0.0, seed=2))
        assert not np.array_equal(a.points, b.points)


def test_generated_cloud_coordinates_finite():
    for kind in ("cube", "planes", "lbracket"):
        cloud = gen_shape(ShapeSpec(kind, 128, 0.02, seed=5))
        assert np.isfinite(cloud.points).all()
        assert math.isfinite(float(cloud.points.sum()))
