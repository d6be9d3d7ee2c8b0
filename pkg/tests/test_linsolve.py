import numpy as np
import pytest

from geofv.mesh import build_cartesian
from geofv.linsolve import SparseSystem, solve


def _random_spd_system(rng, mesh):
    sys = SparseSystem(mesh, symmetric=True)
    T = rng.random(mesh.n_faces) + 0.1
    sys.add_face_diffusion(T)
    sys.diag += rng.random(mesh.n_cells) + 0.5  # diagonally dominant
    sys.rhs = rng.normal(size=mesh.n_cells)
    return sys


def test_pcg_matches_dense_oracle(rng):
    mesh = build_cartesian(10, 10, 1, (1.0, 1.0, 1.0))
    sys = _random_spd_system(rng, mesh)
    tol = 1e-10
    res = solve(sys, tol=tol, max_iter=5000)
    assert res.converged
    assert res.residual <= tol
    x_dense = np.linalg.solve(sys.to_csr().toarray(), sys.rhs)
    err = np.max(np.abs(res.x - x_dense)) / np.max(np.abs(x_dense))
    assert err <= 10 * tol


def test_bicgstab_nonsymmetric(rng):
    mesh = build_cartesian(10, 10, 1, (1.0, 1.0, 1.0))
    sys = SparseSystem(mesh, symmetric=False)
    T = rng.random(mesh.n_faces) + 0.1
    sys.add_face_diffusion(T)
    # asymmetric advection-like perturbation
    sys.upper -= 0.3 * rng.random(mesh.n_faces)
    sys.lower += 0.3 * rng.random(mesh.n_faces)
    sys.diag += 2.0
    sys.rhs = rng.normal(size=mesh.n_cells)
    res = solve(sys, tol=1e-10, max_iter=5000)
    assert res.converged
    x_dense = np.linalg.solve(sys.to_csr().toarray(), sys.rhs)
    assert np.max(np.abs(res.x - x_dense)) <= 1e-8 * np.max(np.abs(x_dense))


def test_reported_residual_is_recomputed(rng):
    mesh = build_cartesian(6, 6, 1, (1.0, 1.0, 1.0))
    sys = _random_spd_system(rng, mesh)
    res = solve(sys, tol=1e-9)
    assert res.residual == pytest.approx(sys.residual_norm(res.x))


def test_nonconvergence_flagged(rng):
    mesh = build_cartesian(12, 12, 1, (1.0, 1.0, 1.0))
    sys = _random_spd_system(rng, mesh)
    res = solve(sys, tol=1e-14, max_iter=2)
    assert not res.converged


def test_warm_start(rng):
    mesh = build_cartesian(8, 8, 1, (1.0, 1.0, 1.0))
    sys = _random_spd_system(rng, mesh)
    cold = solve(sys, tol=1e-10, max_iter=5000)
    warm = solve(sys, x0=cold.x, tol=1e-10, max_iter=5000)
    assert warm.iterations <= 1


def test_ilu_preconditioner(rng):
    mesh = build_cartesian(16, 16, 1, (1.0, 1.0, 1.0))
    sys = _random_spd_system(rng, mesh)
    jac = solve(sys, tol=1e-10, max_iter=5000, precond="jacobi")
    ilu = solve(sys, tol=1e-10, max_iter=5000, precond="ilu")
    assert ilu.converged
    assert ilu.iterations <= jac.iterations
    assert np.allclose(ilu.x, jac.x, atol=1e-8)


def test_unpacking():
    mesh = build_cartesian(2, 1, 1, (1.0, 1.0, 1.0))
    sys = SparseSystem(mesh, symmetric=True)
    sys.add_face_diffusion(np.array([1.0]))
    sys.diag += 1.0
    sys.rhs = np.array([1.0, 0.0])
    x, it, res = solve(sys, tol=1e-12)
    assert res < 1e-12
