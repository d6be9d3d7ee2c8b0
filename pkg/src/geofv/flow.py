"""Darcy pressure assembly, face fluxes, boundary conditions, dual porosity.

The pressure unknown is either total pressure or the reduced pressure
p_rgh = p - rho g.x.  All fluxes are volumetric face fluxes (owner ->
neighbour positive; outward positive on boundary faces) and the
continuity equation is assembled in divergence-of-velocity form, so the
Boussinesq limit is exactly div(v) = 0.

Every boundary condition reduces to per-face coefficients (a, b) with

    outward face flux = a * p_owner - b,

which both the assembly and the flux reconstruction consume, so boundary
fluxes reproduce the assembled residual exactly.
"""

import numpy as np

from .linsolve import SparseSystem, solve
from .mesh import MeshError, normal_permeability

FORMULATIONS = ("total", "reduced")
CONTINUITY = ("boussinesq", "compressible")


class FlowError(ValueError):
    pass


class CellSource:
    """Volumetric source: rate density q [1/s] over a set of cells."""

    def __init__(self, cells, q, rho_star=None, c_star=0.0):
        self.cells = np.atleast_1d(np.asarray(cells, dtype=np.int64))
        self.q = float(q)
        self.rho_star = rho_star   # None -> use local fluid density
        self.c_star = float(c_star)


class FlowState:
    """Material and fluid fields needed by the pressure equation."""

    def __init__(self, mesh, K, mu, rho, S0=0.0, g=(0.0, 0.0, 0.0),
                 sources=()):
        self.mesh = mesh
        self.K = np.asarray(K, dtype=float)
        self.mu = np.broadcast_to(np.asarray(mu, dtype=float),
                                  (mesh.n_cells,)).copy()
        self.rho = np.broadcast_to(np.asarray(rho, dtype=float),
                                   (mesh.n_cells,)).copy()
        self.S0 = np.broadcast_to(np.asarray(S0, dtype=float),
                                  (mesh.n_cells,)).copy()
        self.g = np.asarray(g, dtype=float)
        self.sources = list(sources)
        self.p = np.zeros(mesh.n_cells)
        self.phi_f = np.zeros(mesh.n_faces)
        self.phi_b = {name: np.zeros(p.n_faces)
                      for name, p in mesh.patches.items()}


def mobility_transmissibility(mesh, K, mu):
    """Face mobility coefficients with harmonic K/mu interpolation.

    Returns (T_internal, T_boundary) where T = A / sum(d_half * mu / K_n)
    over the adjacent half-cells; boundary coefficients are one-sided.
    """
    T = np.zeros(mesh.n_faces)
    for axis in range(3):
        sel = mesh.f_axis == axis
        if not np.any(sel):
            continue
        kn = normal_permeability(K, axis, mesh.n_cells)
        if np.any(kn <= 0.0):
            bad = np.flatnonzero(kn <= 0.0)[:10]
            raise MeshError(f"non-positive normal permeability in cells "
                            f"{bad.tolist()}")
        mob = kn / mu
        o, nb = mesh.f_owner[sel], mesh.f_neigh[sel]
        dh = 0.5 * mesh.f_dist[sel]
        T[sel] = mesh.f_area[sel] / (dh / mob[o] + dh / mob[nb])
    Tb = {}
    for name, patch in mesh.patches.items():
        kn = normal_permeability(K, patch.axis, mesh.n_cells)[patch.cells]
        Tb[name] = patch.area * (kn / mu[patch.cells]) / patch.d_half
    return T, Tb


def _face_buoyancy(mesh, state, formulation):
    """Per-internal-face buoyancy term b_f so that flux = -T (dp + b_f)."""
    if not np.any(state.g):
        return np.zeros(mesh.n_faces)
    o, nb = mesh.f_owner, mesh.f_neigh
    if formulation == "reduced":
        gx = mesh.f_centers @ state.g
        return gx * (state.rho[nb] - state.rho[o])
    rho_f = 0.5 * (state.rho[o] + state.rho[nb])
    dx = mesh.cell_centers[nb] - mesh.cell_centers[o]
    return -rho_f * (dx @ state.g)


# -- boundary conditions ------------------------------------------------


class FlowBC:
    """Base: subclasses produce (a, b) with outward flux = a p_O - b."""

    kind = "noFlux"

    def coefficients(self, mesh, patch, ctx):
        n = patch.n_faces
        return np.zeros(n), np.zeros(n)


class NoFlux(FlowBC):
    kind = "noFlux"


class FixedPressure(FlowBC):
    """Dirichlet on total pressure (translated to p_rgh when active)."""

    kind = "fixedPressure"

    def __init__(self, value):
        self.value = value

    def _face_values(self, patch):
        return np.broadcast_to(np.asarray(self.value, dtype=float),
                               (patch.n_faces,))

    def coefficients(self, mesh, patch, ctx):
        Tb = ctx["Tb"][patch.name]
        p_b = self._face_values(patch).copy()
        rho_o = ctx["rho"][patch.cells]
        g = ctx["g"]
        if ctx["formulation"] == "reduced":
            p_b = p_b - rho_o * (patch.centers @ g)
            grav = 0.0
        else:
            dx = patch.centers - mesh.cell_centers[patch.cells]
            grav = -rho_o * (dx @ g)
        return Tb, Tb * (p_b + grav)


class HydrostaticPressure(FixedPressure):
    """Dynamic pressure p_ref at x_ref plus a rho_ref hydrostatic column."""

    kind = "hydrostaticPressure"

    def __init__(self, p_ref, rho_ref, x_ref=(0.0, 0.0, 0.0)):
        super().__init__(p_ref)
        self.rho_ref = float(rho_ref)
        self.x_ref = np.asarray(x_ref, dtype=float)

    def _face_values(self, patch):
        # requires gravity; with g = 0 this is a uniform Dirichlet value
        g = self._g
        return (np.broadcast_to(np.asarray(self.value, dtype=float),
                                (patch.n_faces,))
                + self.rho_ref * ((patch.centers - self.x_ref) @ g))

    def coefficients(self, mesh, patch, ctx):
        self._g = ctx["g"]
        return super().coefficients(mesh, patch, ctx)


class DarcyFixedVelocity(FlowBC):
    """Imposed normal velocity, positive into the domain.

    The known flux enters the right-hand side directly, so the condition
    holds for either pressure formulation and with gravity on.
    """

    kind = "darcyFixedVelocity"

    def __init__(self, velocity):
        self.velocity = velocity

    def coefficients(self, mesh, patch, ctx):
        kn = ctx["Kn"][patch.name]
        if np.any(kn <= 0.0):
            bad = np.flatnonzero(kn <= 0.0)[:10]
            raise FlowError(f"darcyFixedVelocity on patch {patch.name!r} "
                            f"with zero normal permeability at faces "
                            f"{bad.tolist()}")
        v_in = np.broadcast_to(np.asarray(self.velocity, dtype=float),
                               (patch.n_faces,))
        return np.zeros(patch.n_faces), v_in * patch.area


class RobinPressure(FlowBC):
    """alpha p + beta dp/dn = gamma on the active pressure variable."""

    kind = "robin"

    def __init__(self, alpha, beta, gamma):
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.gamma = float(gamma)
        if alpha == 0.0 and beta == 0.0:
            raise FlowError("Robin BC needs alpha or beta nonzero")

    def coefficients(self, mesh, patch, ctx):
        Tb = ctx["Tb"][patch.name]
        denom = self.alpha + self.beta / patch.d_half
        if np.any(np.abs(denom) < 1e-300):
            raise FlowError("degenerate Robin coefficients")
        a = Tb * self.alpha / denom
        b = Tb * self.gamma / denom
        return a, b


# -- assembly and fluxes ------------------------------------------------


def _bc_context(mesh, state, Tb, formulation):
    Kn = {name: normal_permeability(state.K, p.axis,
                                    mesh.n_cells)[p.cells]
          for name, p in mesh.patches.items()}
    return {"Tb": Tb, "Kn": Kn, "rho": state.rho, "g": state.g,
            "formulation": formulation}


def _check_bcs(mesh, bcs):
    missing = [name for name in mesh.patches if name not in bcs]
    if missing:
        raise FlowError(f"no flow boundary condition on patches {missing}")


def assemble_pressure(mesh, state, bcs, formulation="reduced",
                      continuity="boussinesq", dt=None, p_old=None,
                      extra_rhs=None, pin=None):
    """Assemble the pressure system in divergence-of-velocity form.

    ``extra_rhs`` carries the lagged compressible right-hand side (the
    concentration-rate terms); ``pin`` = (cell, value) adds a penalty row
    fixing the pressure level for all-Neumann problems.
    """
    if formulation not in FORMULATIONS:
        raise FlowError(f"unknown formulation {formulation!r}")
    if continuity not in CONTINUITY:
        raise FlowError(f"unknown continuity {continuity!r}")
    if dt is not None and dt <= 0.0:
        raise FlowError(f"dt must be > 0, got {dt}")
    _check_bcs(mesh, bcs)

    T, Tb = mobility_transmissibility(mesh, state.K, state.mu)
    sys = SparseSystem(mesh, symmetric=True)
    sys.add_face_diffusion(T)

    b_f = _face_buoyancy(mesh, state, formulation)
    np.add.at(sys.rhs, mesh.f_owner, T * b_f)
    np.add.at(sys.rhs, mesh.f_neigh, -T * b_f)

    ctx = _bc_context(mesh, state, Tb, formulation)
    for name, patch in mesh.patches.items():
        a, b = bcs[name].coefficients(mesh, patch, ctx)
        np.add.at(sys.diag, patch.cells, a)
        np.add.at(sys.rhs, patch.cells, b)

    V = mesh.cell_volume
    for src in state.sources:
        rho_star = state.rho[src.cells] if src.rho_star is None \
            else src.rho_star
        np.add.at(sys.rhs, src.cells,
                  src.q * V * rho_star / state.rho[src.cells])

    if continuity == "compressible":
        if dt is None:
            raise FlowError("compressible continuity needs dt")
        if p_old is None:
            p_old = state.p
        coef = state.S0 * V / dt
        sys.diag += coef
        sys.rhs += coef * p_old
        if extra_rhs is not None:
            sys.rhs += extra_rhs

    if pin is not None:
        cell, value = pin
        scale = max(np.max(np.abs(sys.diag)), 1.0) * 1e8
        sys.diag[cell] += scale
        sys.rhs[cell] += scale * value
    return sys


def darcy_flux(mesh, state, p, bcs, formulation="reduced"):
    """Face fluxes from a solved pressure, with the assembly operators.

    Returns (phi_internal, phi_boundary) with phi_boundary outward
    positive per patch.
    """
    T, Tb = mobility_transmissibility(mesh, state.K, state.mu)
    b_f = _face_buoyancy(mesh, state, formulation)
    o, nb = mesh.f_owner, mesh.f_neigh
    phi = -T * (p[nb] - p[o] + b_f)
    ctx = _bc_context(mesh, state, Tb, formulation)
    phi_b = {}
    for name, patch in mesh.patches.items():
        a, b = bcs[name].coefficients(mesh, patch, ctx)
        phi_b[name] = a * p[patch.cells] - b
    return phi, phi_b


def cell_divergence(mesh, phi_f, phi_b):
    """Per-cell net outward volumetric flux (continuity residual)."""
    div = np.zeros(mesh.n_cells)
    np.add.at(div, mesh.f_owner, phi_f)
    np.add.at(div, mesh.f_neigh, -phi_f)
    for name, patch in mesh.patches.items():
        np.add.at(div, patch.cells, phi_b[name])
    return div


def cell_velocity(mesh, phi_f, phi_b):
    """Cell-centered Darcy velocity from face fluxes (per-axis average)."""
    v = np.zeros((mesh.n_cells, 3))
    count = np.zeros((mesh.n_cells, 3))
    o, nb = mesh.f_owner, mesh.f_neigh
    for axis in range(3):
        sel = mesh.f_axis == axis
        if np.any(sel):
            u = phi_f[sel] / mesh.f_area[sel]
            np.add.at(v[:, axis], o[sel], u)
            np.add.at(v[:, axis], nb[sel], u)
            np.add.at(count[:, axis], o[sel], 1.0)
            np.add.at(count[:, axis], nb[sel], 1.0)
    for name, patch in mesh.patches.items():
        u = patch.sign * phi_b[name] / patch.area
        np.add.at(v[:, patch.axis], patch.cells, u)
        np.add.at(count[:, patch.axis], patch.cells, 1.0)
    count[count == 0.0] = 1.0
    return v / count


# -- dual porosity ------------------------------------------------------


class DualPorosityState:
    """Two overlapping continua exchanging mass through a linear term."""

    def __init__(self, matrix, fracture, tau0):
        self.matrix = matrix
        self.fracture = fracture
        self.tau0 = np.asarray(tau0, dtype=float)
        if np.any(self.tau0 < 0.0):
            raise FlowError("transfer coefficient tau0 must be >= 0")


class DualResult:
    def __init__(self, p, p_hat, outer, converged, history):
        self.p = p
        self.p_hat = p_hat
        self.outer = outer
        self.converged = converged
        self.history = history


def solve_dual_porosity(mesh, dual, bcs_matrix, bcs_fracture,
                        scheme="schur_split", tol=1e-8, max_outer=2000,
                        lin_tol=1e-10, pin=None, formulation="reduced"):
    """Iteratively solve the coupled two-continuum pressure system.

    ``segregated`` lags the partner pressure in the transfer term;
    ``schur_split`` additionally augments each diagonal with the transfer
    coefficient filtered through the partner's diagonal, which preserves
    the same fixed point but removes the slow transfer-dominated modes.
    """
    if scheme not in ("segregated", "schur_split"):
        raise FlowError(f"unknown dual-porosity scheme {scheme!r}")
    V = mesh.cell_volume
    tau = np.broadcast_to(dual.tau0, (mesh.n_cells,)) * V

    # With a nonzero transfer term both operators are regularised by tau,
    # so the systems stay solvable without a pin.  Pinning a single cell
    # would anchor the pressure level only within the transfer screening
    # length sqrt(lambda/tau0) and leave a near-unit slow mode; instead the
    # joint constant (the all-Neumann nullspace of the coupled system) is
    # removed by shifting both continua after each sweep.
    tau_zero = not np.any(tau > 0.0)
    sys_m = assemble_pressure(mesh, dual.matrix, bcs_matrix,
                              formulation=formulation,
                              pin=pin if tau_zero else None)
    sys_f = assemble_pressure(mesh, dual.fracture, bcs_fracture,
                              formulation=formulation)
    base_m = (sys_m.diag.copy(), sys_m.rhs.copy())
    base_f = (sys_f.diag.copy(), sys_f.rhs.copy())
    A0_m = sys_m.to_csr()
    A0_f = sys_f.to_csr()
    bnorm = max(np.linalg.norm(base_m[1]), np.linalg.norm(base_f[1]), 1e-300)

    p = np.zeros(mesh.n_cells)
    p_hat = np.zeros(mesh.n_cells)
    history = []
    converged = False
    outer = 0
    diag_m_full = base_m[0] + tau
    diag_f_full = base_f[0] + tau
    for outer in range(1, max_outer + 1):
        sys_m.diag = diag_m_full
        sys_m.rhs = base_m[1] + tau * p_hat
        if scheme == "schur_split":
            # predict the partner update through its diagonal: the
            # lagged-p terms cancel and the fixed point is unchanged
            r_f = base_f[1] - A0_f @ p_hat - tau * p_hat
            sys_m.diag = sys_m.diag - tau ** 2 / diag_f_full
            sys_m.rhs = sys_m.rhs + (tau / diag_f_full) * r_f
        p = solve(sys_m, x0=p, tol=lin_tol, max_iter=20000).x

        sys_f.diag = diag_f_full
        sys_f.rhs = base_f[1] + tau * p
        if scheme == "schur_split":
            r_m = base_m[1] - A0_m @ p - tau * p
            sys_f.diag = sys_f.diag - tau ** 2 / diag_m_full
            sys_f.rhs = sys_f.rhs + (tau / diag_m_full) * r_m
        p_hat = solve(sys_f, x0=p_hat, tol=lin_tol, max_iter=20000).x

        if pin is not None and not tau_zero:
            shift = p[pin[0]] - pin[1]
            p = p - shift
            p_hat = p_hat - shift

        # residual of the coupled block system, both continua
        res_m = A0_m @ p + tau * (p - p_hat) - base_m[1]
        res_f = A0_f @ p_hat + tau * (p_hat - p) - base_f[1]
        res = max(np.linalg.norm(res_m), np.linalg.norm(res_f)) / bnorm
        history.append(res)
        if res < tol:
            converged = True
            break
    return DualResult(p, p_hat, outer, converged, history)
