"""Sparse assembly storage and Krylov solvers for the FV discretizations.

Matrices are stored in the same owner/neighbour layout as the mesh faces
(diagonal + one coefficient pair per internal face), which is exactly the
sparsity the assembly produces.  Solvers are preconditioned CG for
symmetric systems and BiCGStab otherwise, Jacobi-preconditioned by
default with an optional incomplete-LU mode backed by scipy.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


class SolveResult:
    def __init__(self, x, iterations, residual, converged):
        self.x = x
        self.iterations = iterations
        self.residual = residual   # recomputed ||b - Ax|| / ||b||
        self.converged = converged

    def __iter__(self):  # allow x, it, res = solve(...)
        yield self.x
        yield self.iterations
        yield self.residual


class SparseSystem:
    """FV linear system on the mesh adjacency pattern.

    ``upper[f]`` is the coefficient of the neighbour unknown in the owner
    row of face f, ``lower[f]`` the owner coefficient in the neighbour row.
    """

    def __init__(self, mesh, symmetric=False):
        self.mesh = mesh
        self.n = mesh.n_cells
        self.diag = np.zeros(self.n)
        self.upper = np.zeros(mesh.n_faces)
        self.lower = np.zeros(mesh.n_faces)
        self.rhs = np.zeros(self.n)
        self.symmetric = symmetric

    def add_face_diffusion(self, T):
        """Add -div(T grad) rows for face coefficients T (length n_faces)."""
        o, nb = self.mesh.f_owner, self.mesh.f_neigh
        np.add.at(self.diag, o, T)
        np.add.at(self.diag, nb, T)
        np.add.at(self.upper, np.arange(self.mesh.n_faces), -T)
        np.add.at(self.lower, np.arange(self.mesh.n_faces), -T)

    def to_csr(self):
        o, nb = self.mesh.f_owner, self.mesh.f_neigh
        rows = np.concatenate([np.arange(self.n), o, nb])
        cols = np.concatenate([np.arange(self.n), nb, o])
        data = np.concatenate([self.diag, self.upper, self.lower])
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    def residual_norm(self, x):
        A = self.to_csr()
        b = self.rhs
        nb = np.linalg.norm(b)
        return np.linalg.norm(b - A @ x) / max(nb, 1e-300)


def _jacobi(A):
    d = A.diagonal().copy()
    d[d == 0.0] = 1.0
    inv = 1.0 / d

    def apply(r):
        return inv * r
    return apply


def _ilu(A):
    op = spla.spilu(A.tocsc(), drop_tol=1e-5, fill_factor=20)

    def apply(r):
        return op.solve(r)
    return apply


def ilu_operator(system, drop_tol=1e-5, fill_factor=20):
    """Frozen ILU preconditioner for ``solve(..., precond_op=...)``.

    Factoring once and reusing the operator across a sequence of slowly
    drifting systems (e.g. Picard outer iterations) amortizes the setup
    cost; the caller decides when to refresh.
    """
    return _ilu(system.to_csr())


def _pcg(A, b, M, x0, tol, max_iter):
    x = x0.copy()
    r = b - A @ x
    bnorm = max(np.linalg.norm(b), 1e-300)
    z = M(r)
    p = z.copy()
    rz = r @ z
    it = 0
    while it < max_iter:
        if np.linalg.norm(r) / bnorm <= tol:
            break
        Ap = A @ p
        pAp = p @ Ap
        if abs(pAp) < 1e-300:
            raise ZeroDivisionError("CG breakdown: p.A.p ~ 0")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = M(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    return x, it


def _bicgstab(A, b, M, x0, tol, max_iter):
    x = x0.copy()
    r = b - A @ x
    bnorm = max(np.linalg.norm(b), 1e-300)
    r0 = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    it = 0
    restarts = 0
    while it < max_iter:
        rnorm = np.linalg.norm(r)
        if rnorm / bnorm <= tol:
            break
        rho_new = r0 @ r
        # the shadow vector drifting orthogonal to r is a stagnation of
        # the recurrence, not of the iterate: restart with a fresh r0
        if abs(rho_new) < 1e-14 * rnorm * np.linalg.norm(r0):
            restarts += 1
            if restarts > 20:
                raise ZeroDivisionError("BiCGStab breakdown: rho ~ 0")
            r0 = r.copy()
            rho = alpha = omega = 1.0
            v = np.zeros_like(b)
            p = np.zeros_like(b)
            it += 1
            continue
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        phat = M(p)
        v = A @ phat
        denom = r0 @ v
        if abs(denom) < 1e-300:
            raise ZeroDivisionError("BiCGStab breakdown: r0.v ~ 0")
        alpha = rho_new / denom
        s = r - alpha * v
        if np.linalg.norm(s) / bnorm <= tol:
            x += alpha * phat
            r = s
            it += 1
            break
        shat = M(s)
        t = A @ shat
        tt = t @ t
        if tt < 1e-300:
            raise ZeroDivisionError("BiCGStab breakdown: t.t ~ 0")
        omega = (t @ s) / tt
        x += alpha * phat + omega * shat
        r = s - omega * t
        rho = rho_new
        it += 1
    return x, it


def solve(system, x0=None, tol=1e-8, max_iter=2000, precond="jacobi",
          precond_op=None):
    """Solve a SparseSystem; CG when symmetric, BiCGStab otherwise.

    Returns a SolveResult with the residual recomputed from scratch.  On a
    Krylov breakdown the solver restarts once from the current iterate and
    raises SolverError if it breaks down again.  Non-convergence within
    ``max_iter`` is flagged on the result, not fatal.

    ``precond_op`` is a caller-supplied preconditioner callable (see
    :func:`ilu_operator`).  ILU factors are not symmetric operators, so
    both ``precond="ilu"`` and ``precond_op`` pair with BiCGStab even on
    symmetric systems.
    """
    A = system.to_csr()
    b = system.rhs
    if x0 is None:
        x0 = np.zeros(system.n)
    else:
        x0 = np.asarray(x0, dtype=float).copy()
    if precond_op is not None:
        M = precond_op
    else:
        M = _ilu(A) if precond == "ilu" else _jacobi(A)
    symmetric_ok = system.symmetric and precond != "ilu" \
        and precond_op is None
    step = _pcg if symmetric_ok else _bicgstab
    iters = 0
    x = x0
    for attempt in range(2):
        try:
            x, it = step(A, b, M, x, tol, max_iter - iters)
            iters += it
            break
        except ZeroDivisionError as exc:
            iters += 1
            if attempt == 1:
                res = system.residual_norm(x)
                raise SolverError(f"{exc}; residual {res:.3e} after "
                                  f"{iters} iterations") from exc
    res = system.residual_norm(x)
    return SolveResult(x, iters, res, res <= tol)
