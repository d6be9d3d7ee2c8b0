import numpy as np
import pytest

from geofv.mesh import Field, build_cartesian
from geofv.vtkio import VTKError, read_vtk, write_csv, write_vtk


@pytest.fixture
def mesh():
    return build_cartesian(4, 3, 1, (2.0, 1.5, 1.0))


def test_roundtrip_scalar_and_vector(mesh):
    rng = np.random.Generator(np.random.Philox(key=42))
    c = rng.random(mesh.n_cells)
    v = rng.random((mesh.n_cells, 3))
    path = write_vtk("/tmp/geofv_rt.vtk", mesh, {"c": c, "v": v})
    dims, origin, spacing, fields = read_vtk(path)
    assert dims == (5, 4, 2)
    assert np.allclose(origin, mesh.origin)
    assert np.allclose(spacing, mesh.spacing)
    assert np.allclose(fields["c"], c, rtol=1e-8)
    assert np.allclose(fields["v"], v, rtol=1e-8)


def test_nine_significant_digits(mesh):
    c = np.full(mesh.n_cells, np.pi * 1e5)
    path = write_vtk("/tmp/geofv_fmt.vtk", mesh, {"c": c})
    text = open(path).read()
    assert "314159.265" in text


def test_fields_sorted_and_field_objects(mesh):
    z = Field(mesh, np.zeros(mesh.n_cells), name="zeta")
    a = np.ones(mesh.n_cells)
    path = write_vtk("/tmp/geofv_sort.vtk", mesh, {"zeta": z, "alpha": a})
    text = open(path).read()
    assert text.index("SCALARS alpha") < text.index("SCALARS zeta")


def test_byte_identical_rewrites(mesh):
    c = np.linspace(0.0, 1.0, mesh.n_cells)
    p1 = write_vtk("/tmp/geofv_a.vtk", mesh, {"c": c})
    p2 = write_vtk("/tmp/geofv_b.vtk", mesh, {"c": c.copy()})
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_nan_refused_with_cells(mesh):
    c = np.zeros(mesh.n_cells)
    c[3] = np.nan
    c[7] = np.inf
    with pytest.raises(VTKError, match=r"\[3, 7\]"):
        write_vtk("/tmp/geofv_nan.vtk", mesh, {"c": c})


def test_wrong_shape(mesh):
    with pytest.raises(VTKError, match="shape"):
        write_vtk("/tmp/geofv_shape.vtk", mesh, {"c": np.zeros(5)})


def test_csv_writer():
    path = write_csv("/tmp/geofv_t.csv", ["t", "name", "value"],
                     [[0.5, "mean", 1.0 / 3.0], [1.0, "mean", 2.0 / 3.0]])
    lines = open(path).read().splitlines()
    assert lines[0] == "t,name,value"
    assert lines[1] == "0.5,mean,0.333333333"
    with pytest.raises(VTKError, match="width"):
        write_csv("/tmp/geofv_t2.csv", ["a", "b"], [[1.0]])
