import numpy as np
import pytest

from decwave.io import frame_name, read_csv_field, read_vtk_scalars, write_csv, write_vtk
from decwave.mesh import generate_icosphere, generate_tetrahedron


def test_frame_name():
    assert frame_name(40) == "frame_000040.vtk"
    assert frame_name(0, "csv") == "frame_000000.csv"


class TestVtk:
    def test_tetrahedron_structure(self, tmp_path):
        mesh = generate_tetrahedron()
        path = tmp_path / "t.vtk"
        write_vtk(mesh, np.zeros(4), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "# vtk DataFile Version 3.0"
        assert lines[2:5] == ["ASCII", "DATASET POLYDATA", "POINTS 4 float"]
        assert lines[9] == "POLYGONS 4 16"
        assert all(l.startswith("3 ") and len(l.split()) == 4 for l in lines[10:14])
        assert lines[14:17] == ["POINT_DATA 4", "SCALARS u float 1", "LOOKUP_TABLE default"]
        assert lines[17:] == ["0"] * 4

    def test_round_trip(self, tmp_path, rng):
        mesh = generate_icosphere(1.0, 2)
        u = rng.standard_normal(mesh.n_vertices) * 10.0 ** rng.integers(-3, 4, mesh.n_vertices)
        path = tmp_path / "u.vtk"
        write_vtk(mesh, u, path)
        back = read_vtk_scalars(path)
        assert np.all(np.abs(back - u) <= 1e-6 * np.maximum(1.0, np.abs(u)))

    def test_nine_significant_digits(self, tmp_path):
        mesh = generate_tetrahedron()
        path = tmp_path / "u.vtk"
        write_vtk(mesh, [1 / 3, 2.0, -1e-20, 123456789.123], path)
        assert path.read_text().splitlines()[-4:] == ["0.333333333", "2", "-1e-20", "123456789"]

    def test_length_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            write_vtk(generate_tetrahedron(), np.zeros(3), tmp_path / "x.vtk")


class TestCsv:
    def test_line_count_and_header(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(generate_tetrahedron(), np.arange(4.0), path)
        lines = path.read_text().splitlines()
        assert len(lines) == 5
        assert lines[0] == "vertex,x,y,z,u"
        assert [int(l.split(",")[0]) for l in lines[1:]] == [0, 1, 2, 3]

    def test_exact_round_trip(self, tmp_path, rng):
        mesh = generate_icosphere(1.0, 1)
        u = rng.standard_normal(mesh.n_vertices) / 3.0
        path = tmp_path / "u.csv"
        write_csv(mesh, u, path)
        assert np.array_equal(read_csv_field(path), u)
        coords = np.loadtxt(path, delimiter=",", skiprows=1)[:, 1:4]
        assert np.array_equal(coords, mesh.vertices)
