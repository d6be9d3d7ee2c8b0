import numpy as np
import pytest

from geofv.mesh import (Field, MeshError, build_cartesian,
                        face_transmissibility, normal_permeability)


def test_basic_geometry():
    m = build_cartesian(4, 3, 2, (2.0, 1.5, 1.0))
    assert m.n_cells == 24
    assert np.allclose(m.spacing, [0.5, 0.5, 0.5])
    assert m.cell_volume == pytest.approx(0.125)
    # x fastest: cell 1 is (1, 0, 0)
    assert np.allclose(m.cell_centers[0], [0.25, 0.25, 0.25])
    assert np.allclose(m.cell_centers[1], [0.75, 0.25, 0.25])
    assert np.allclose(m.cell_centers[4], [0.25, 0.75, 0.25])
    assert m.cell_index(1, 2, 1) == 1 + 4 * (2 + 3 * 1)


def test_internal_face_counts():
    m = build_cartesian(4, 3, 2, (1.0, 1.0, 1.0))
    nx, ny, nz = 4, 3, 2
    expect = (nx - 1) * ny * nz + nx * (ny - 1) * nz + nx * ny * (nz - 1)
    assert m.n_faces == expect
    # owner < neighbour everywhere; axis strides respected
    stride = {0: 1, 1: nx, 2: nx * ny}
    for ax in range(3):
        sel = m.f_axis == ax
        assert np.all(m.f_neigh[sel] - m.f_owner[sel] == stride[ax])


def test_collapsed_dimensions():
    m = build_cartesian(5, 1, 1, (1.0, 1.0, 1.0))
    assert m.n_faces == 4
    assert np.all(m.f_axis == 0)
    assert m.patches["ymin"].n_faces == 5


def test_patches():
    m = build_cartesian(4, 3, 1, (2.0, 1.5, 1.0))
    p = m.patches["xmin"]
    assert p.n_faces == 3
    assert np.all(p.cells == [0, 4, 8])
    assert np.allclose(p.centers[:, 0], 0.0)
    assert np.allclose(p.normal(), [-1, 0, 0])
    q = m.patches["ymax"]
    assert np.allclose(q.centers[:, 1], 1.5)
    assert q.sign == 1


def test_shaped_roundtrip():
    m = build_cartesian(3, 2, 2, (1.0, 1.0, 1.0))
    flat = np.arange(m.n_cells, dtype=float)
    s = m.shaped(flat)
    assert s.shape == (3, 2, 2)
    for i in range(3):
        for j in range(2):
            for k in range(2):
                assert s[i, j, k] == flat[m.cell_index(i, j, k)]


def test_mesh_errors():
    with pytest.raises(MeshError):
        build_cartesian(0, 1, 1, (1.0, 1.0, 1.0))
    with pytest.raises(MeshError):
        build_cartesian(2, 2, 1, (1.0, -1.0, 1.0))


def test_field_ranks(mesh1d):
    f = Field.uniform(mesh1d, 2.5)
    assert f.values.shape == (10,)
    v = Field.uniform(mesh1d, [1.0, 2.0, 3.0], rank="vector")
    assert v.values.shape == (10, 3)
    t = Field.uniform(mesh1d, [1, 2, 3, 0.1, 0.2, 0.3], rank="symm_tensor")
    M = t.tensor_matrix(0)
    assert np.allclose(M, M.T)
    assert M[0, 1] == 0.1 and M[0, 2] == 0.2 and M[1, 2] == 0.3
    with pytest.raises(MeshError):
        Field(mesh1d, np.zeros(7))
    with pytest.raises(MeshError):
        Field(mesh1d, np.zeros(10), rank="tensor4")


def test_normal_permeability_shapes():
    n = 4
    assert np.allclose(normal_permeability(2.0, 1, n), 2.0)
    iso = np.arange(1.0, 5.0)
    assert np.allclose(normal_permeability(iso, 2, n), iso)
    diag = np.tile([1.0, 2.0, 3.0], (n, 1))
    assert np.allclose(normal_permeability(diag, 1, n), 2.0)
    full = np.tile([1.0, 2.0, 3.0, 0.5, 0.5, 0.5], (n, 1))
    assert np.allclose(normal_permeability(full, 0, n), 1.0)


def test_transmissibility_harmonic_two_layer():
    # 2 cells along x, permeabilities k1, k2: T = A / (d/2k1 + d/2k2)
    m = build_cartesian(2, 1, 1, (1.0, 1.0, 1.0))
    k1, k2 = 3.0, 7.0
    T, Tb = face_transmissibility(m, np.array([k1, k2]))
    d = 0.25  # half distance between centers is 0.25? no: dist=0.5, dh=0.25
    expect = 1.0 / (d / k1 + d / k2)
    assert T[0] == pytest.approx(expect, rel=1e-14)
    assert Tb["xmin"][0] == pytest.approx(1.0 * k1 / 0.25, rel=1e-14)


def test_transmissibility_rejects_nonpositive(mesh1d):
    K = np.ones(10)
    K[3] = 0.0
    with pytest.raises(MeshError, match="3"):
        face_transmissibility(mesh1d, K)
