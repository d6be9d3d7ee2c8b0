"""Implicit advection-dispersion transport on the flow face fluxes.

Advection is first-order upwind on the volumetric face fluxes (an
optional limited-linear correction runs through the deferred-correction
sweeps).  Dispersion is implicit in the face-normal direction with
harmonic face diffusivities; the cross (off-normal) part of the tensor is
an explicit deferred correction.  Boundary conditions use the same
(a, b) convention as the flow module: outward solute flux = a c_O - b.
"""

import logging

import numpy as np

from .constitutive import dispersion_tensor
from .linsolve import SparseSystem, solve
from .mesh import normal_permeability

log = logging.getLogger(__name__)

_AX_COMP = ((0, 3, 4), (3, 1, 5), (4, 5, 2))  # tensor row per face axis


class TransportError(ValueError):
    pass


class TransportState:
    """Concentration (or temperature) plus the fields advancing it."""

    def __init__(self, mesh, c, porosity, dispersion, scheme="upwind",
                 n_correctors=2):
        self.mesh = mesh
        self.c = np.broadcast_to(np.asarray(c, dtype=float),
                                 (mesh.n_cells,)).copy()
        self.porosity = np.broadcast_to(np.asarray(porosity, dtype=float),
                                        (mesh.n_cells,)).copy()
        self.dispersion = dispersion
        self.scheme = scheme
        self.n_correctors = int(n_correctors)
        self.phi_f = np.zeros(mesh.n_faces)
        self.phi_b = {name: np.zeros(p.n_faces)
                      for name, p in mesh.patches.items()}
        self.sources = []
        self.c_old = self.c.copy()
        self.c_old2 = None
        self.dt_old = None
        self.boundary_outflux = None   # set by advance_transport


def cell_diffusion_tensor(state, velocity):
    """phi * D per cell as (n, 6) symmetric components."""
    D = dispersion_tensor(velocity, state.dispersion)
    return state.porosity[:, None] * D


# -- boundary conditions ------------------------------------------------


class TransportBC:
    kind = "noFlux"

    def coefficients(self, mesh, patch, ctx):
        n = patch.n_faces
        return np.zeros(n), np.zeros(n)


class NoFluxTransport(TransportBC):
    kind = "noFlux"


class FixedConcentration(TransportBC):
    kind = "fixedValue"

    def __init__(self, value):
        self.value = value

    def coefficients(self, mesh, patch, ctx):
        cb = np.broadcast_to(np.asarray(self.value, dtype=float),
                             (patch.n_faces,))
        Tb = ctx["TDb"][patch.name]
        phi_b = ctx["phi_b"][patch.name]
        return Tb.copy(), (Tb - phi_b) * cb


class ZeroGradient(TransportBC):
    kind = "zeroGradient"

    def coefficients(self, mesh, patch, ctx):
        phi_b = ctx["phi_b"][patch.name]
        return phi_b.copy(), np.zeros(patch.n_faces)


class InletOutlet(TransportBC):
    """Dirichlet where the flow enters, zero-gradient where it leaves.

    Re-evaluated on the current fluxes at every assembly, so the switch
    follows the Picard iteration.  The two branches are blended linearly
    over a narrow flux band around zero: a hard sign switch makes the
    outer iteration discontinuous, and faces where the flux hovers near
    zero then flip classification every sweep and limit-cycle instead of
    converging.
    """

    kind = "inletOutlet"

    def __init__(self, value):
        self.value = value

    def coefficients(self, mesh, patch, ctx):
        cb = np.broadcast_to(np.asarray(self.value, dtype=float),
                             (patch.n_faces,))
        Tb = ctx["TDb"][patch.name]
        phi_b = ctx["phi_b"][patch.name]
        eps = 1e-2 * max(float(np.max(np.abs(phi_b))), 1e-300)
        w = np.clip(0.5 - phi_b / (2.0 * eps), 0.0, 1.0)   # 1 = inflow
        a = w * Tb + (1.0 - w) * phi_b
        b = w * (Tb - phi_b) * cb
        return a, b


class FixedTransportFlux(TransportBC):
    """Imposed total boundary flux with an implicit reconstruction term.

    The inward solute flux per unit area is

        u_n f_a + d (f_d - f) / delta + F,

    with f taken implicitly at the adjacent cell.  ``u_n`` is positive
    into the domain; when None it is taken from the flow solution.
    ``delta`` defaults to the half-cell distance.
    """

    kind = "fixedTransportFlux"

    def __init__(self, f_a=0.0, u_n=None, d=0.0, f_d=0.0, F=0.0, delta=None):
        self.f_a = float(f_a)
        self.u_n = u_n
        self.d = float(d)
        self.f_d = float(f_d)
        self.F = float(F)
        self.delta = delta
        if d != 0.0 and delta is not None and delta <= 0.0:
            raise TransportError("fixedTransportFlux needs delta > 0 when "
                                 "d != 0")

    def coefficients(self, mesh, patch, ctx):
        area = patch.area
        if self.u_n is None:
            u_n = -ctx["phi_b"][patch.name] / area
        else:
            u_n = np.broadcast_to(np.asarray(self.u_n, dtype=float),
                                  (patch.n_faces,))
        delta = patch.d_half if self.delta is None else self.delta
        a = area * self.d / delta
        if np.ndim(a) == 0:
            a = np.full(patch.n_faces, float(a))
        b = area * (u_n * self.f_a + self.d * self.f_d / delta + self.F)
        return a, b


# -- assembly -----------------------------------------------------------


def _face_normal_diffusivity(mesh, phiD):
    """Harmonic face value of n.(phi D).n, internal and boundary."""
    T = np.zeros(mesh.n_faces)
    for axis in range(3):
        sel = mesh.f_axis == axis
        if not np.any(sel):
            continue
        dn = np.maximum(phiD[:, axis], 0.0)
        o, nb = mesh.f_owner[sel], mesh.f_neigh[sel]
        dh = 0.5 * mesh.f_dist[sel]
        num = dn[o] * dn[nb]
        den = dn[nb] * dh + dn[o] * dh
        T[sel] = mesh.f_area[sel] * np.where(den > 0.0, num
                                             / np.where(den > 0.0, den, 1.0),
                                             0.0)
    Tb = {}
    for name, patch in mesh.patches.items():
        dn = np.maximum(phiD[patch.cells, patch.axis], 0.0)
        Tb[name] = patch.area * dn / patch.d_half
    return T, Tb


def cell_gradient(mesh, c):
    """Gauss cell gradients with arithmetic face values.

    Boundary faces use linear extrapolation from the owner and its inward
    neighbour, which keeps the gradient exact for linear fields.
    """
    grad = np.zeros((mesh.n_cells, 3))
    o, nb = mesh.f_owner, mesh.f_neigh
    cf = 0.5 * (c[o] + c[nb])
    for axis in range(3):
        sel = mesh.f_axis == axis
        if not np.any(sel):
            continue
        contrib = mesh.f_area[sel] * cf[sel]
        np.add.at(grad[:, axis], o[sel], contrib)
        np.add.at(grad[:, axis], nb[sel], -contrib)
    strides = (1, mesh.nx, mesh.nx * mesh.ny)
    for patch in mesh.patches.values():
        cb = c[patch.cells]
        if mesh.n[patch.axis] > 1:
            inward = patch.cells - patch.sign * strides[patch.axis]
            cb = 1.5 * cb - 0.5 * c[inward]
        contrib = patch.sign * patch.area * cb
        np.add.at(grad[:, patch.axis], patch.cells, contrib)
    return grad / mesh.cell_volume


def _cross_diffusion_correction(mesh, phiD, c):
    """Cross (off-normal) tensor diffusion as explicit rhs increments.

    Returns the per-internal-face owner rhs increment (the neighbour gets
    its negative) and the per-patch boundary increment, i.e. the part of
    A n.(phi D grad c) the two-point implicit stencil does not see.
    """
    grad = cell_gradient(mesh, c)
    o, nb = mesh.f_owner, mesh.f_neigh
    corr = np.zeros(mesh.n_faces)
    gf = 0.5 * (grad[o] + grad[nb])
    Df = 0.5 * (phiD[o] + phiD[nb])
    for axis in range(3):
        sel = mesh.f_axis == axis
        if not np.any(sel):
            continue
        comps = _AX_COMP[axis]
        other = [ax for ax in range(3) if ax != axis]
        flux = np.zeros(np.count_nonzero(sel))
        for ax in other:
            flux += Df[sel][:, comps[ax]] * gf[sel][:, ax]
        corr[sel] = mesh.f_area[sel] * flux
    corr_b = {}
    for name, patch in mesh.patches.items():
        comps = _AX_COMP[patch.axis]
        other = [ax for ax in range(3) if ax != patch.axis]
        flux = np.zeros(patch.n_faces)
        for ax in other:
            flux += phiD[patch.cells, comps[ax]] * grad[patch.cells, ax]
        corr_b[name] = patch.sign * patch.area * flux
    return corr, corr_b


def _bdf_coefficients(scheme, dt, dt_old, have_history):
    if scheme == "bdf2" and not have_history:
        log.info("bdf2 requested without history; first step uses euler")
        scheme = "euler"
    if scheme == "euler":
        return 1.0, 1.0, 0.0
    r = dt / dt_old
    a0 = (1.0 + 2.0 * r) / (1.0 + r)
    a1 = 1.0 + r
    a2 = r * r / (1.0 + r)
    return a0, a1, a2


def assemble_transport(mesh, state, bcs, dt=None, time_scheme="euler",
                       sources=(), c_expl=None, phiD=None, velocity=None):
    """Assemble the implicit transport system.

    ``dt=None`` assembles the steady operator.  ``c_expl`` is the
    previous iterate used by the deferred corrections (cross diffusion
    and the limited-linear scheme); None disables them for this sweep.
    """
    if dt is not None and dt <= 0.0:
        raise TransportError(f"dt must be > 0, got {dt}")
    missing = [name for name in mesh.patches if name not in bcs]
    if missing:
        raise TransportError(f"no transport boundary condition on patches "
                             f"{missing}")

    if phiD is None:
        if velocity is None:
            from .flow import cell_velocity
            velocity = cell_velocity(mesh, state.phi_f, state.phi_b)
        phiD = cell_diffusion_tensor(state, velocity)

    sys = SparseSystem(mesh, symmetric=False)
    TD, TDb = _face_normal_diffusivity(mesh, phiD)
    sys.add_face_diffusion(TD)

    # upwind advection on the face fluxes
    phi = state.phi_f
    pos = np.maximum(phi, 0.0)
    neg = np.minimum(phi, 0.0)
    o, nb = mesh.f_owner, mesh.f_neigh
    np.add.at(sys.diag, o, pos)
    sys.upper += neg
    np.add.at(sys.diag, nb, -neg)
    sys.lower += -pos

    ctx = {"TDb": TDb, "phi_b": state.phi_b}
    bc_terms = {}
    for name, patch in mesh.patches.items():
        a, b = bcs[name].coefficients(mesh, patch, ctx)
        np.add.at(sys.diag, patch.cells, a)
        np.add.at(sys.rhs, patch.cells, b)
        bc_terms[name] = (a, np.array(b, dtype=float))

    V = mesh.cell_volume
    for src in sources:
        if src.q >= 0.0:
            np.add.at(sys.rhs, src.cells, src.q * V * src.c_star)
        else:   # sinks withdraw at the local concentration, implicitly
            np.add.at(sys.diag, src.cells, -src.q * V)

    if dt is not None:
        a0, a1, a2 = _bdf_coefficients(time_scheme, dt,
                                       state.dt_old,
                                       state.c_old2 is not None)
        coef = state.porosity * V / dt
        sys.diag += a0 * coef
        sys.rhs += a1 * coef * state.c_old
        if a2 != 0.0:
            sys.rhs -= a2 * coef * state.c_old2

    if c_expl is not None:
        corr, corr_b = _cross_diffusion_correction(mesh, phiD, c_expl)
        if state.scheme == "limited_linear":
            corr = corr + _limited_linear_correction(mesh, phi, c_expl)
        np.add.at(sys.rhs, o, corr)
        np.add.at(sys.rhs, nb, -corr)
        # the cross-term flux only exists where a Dirichlet value anchors
        # the tangential gradient; on flux-type patches (noFlux,
        # inletOutlet, ...) adding it would push mass through boundaries
        # whose total flux the condition already prescribes
        for name, patch in mesh.patches.items():
            if bcs[name].kind == "fixedValue":
                np.add.at(sys.rhs, patch.cells, corr_b[name])
                bc_terms[name] = (bc_terms[name][0],
                                  bc_terms[name][1] + corr_b[name])
    sys.bc_terms = bc_terms
    return sys


def _limited_linear_correction(mesh, phi, c):
    """Deferred correction from upwind to limited linear interpolation.

    Van Leer limiter on the upwind-side gradient ratio; reduces to plain
    linear interpolation in smooth regions.
    """
    o, nb = mesh.f_owner, mesh.f_neigh
    up = np.where(phi >= 0.0, o, nb)
    dn = np.where(phi >= 0.0, nb, o)
    d1 = c[dn] - c[up]
    # far-upwind value via the structured stride; fall back to upwind
    # (psi = 0) where the far cell would leave the grid
    stride = np.where(mesh.f_axis == 0, 1,
                      np.where(mesh.f_axis == 1, mesh.nx,
                               mesh.nx * mesh.ny))
    n_ax = np.array(mesh.n)[mesh.f_axis]
    step = np.sign(dn - up).astype(np.int64)
    coord = (up // stride) % n_ax
    valid = (coord - step >= 0) & (coord - step < n_ax)
    far = np.where(valid, up - step * stride, up)
    d0 = c[up] - c[far]
    denom = np.where(np.abs(d1) > 1e-300, d1, 1e-300)
    r = d0 / denom
    psi = (r + np.abs(r)) / (1.0 + np.abs(r))
    c_face = c[up] + 0.5 * psi * d1
    c_up = c[up]
    return -phi * (c_face - c_up)   # extra outward-from-owner advective flux


def advance_transport(mesh, state, bcs, dt, time_scheme="euler",
                      sources=None, tol=1e-10, max_iter=2000,
                      velocity=None, commit=True):
    """One implicit step with deferred-correction sweeps.

    Runs ``state.n_correctors`` extra assemble+solve passes feeding the
    previous solution into the explicit corrections.  Returns the new
    concentration without committing history unless ``commit``.
    ``sources`` defaults to ``state.sources``.
    """
    if sources is None:
        sources = state.sources
    if velocity is None:
        from .flow import cell_velocity
        velocity = cell_velocity(mesh, state.phi_f, state.phi_b)
    phiD = cell_diffusion_tensor(state, velocity)
    c = state.c
    need_corr = (state.n_correctors > 0
                 and (state.scheme == "limited_linear"
                      or _has_cross_terms(phiD)))
    sweeps = 1 + (state.n_correctors if need_corr else 0)
    for sweep in range(sweeps):
        c_expl = None if (sweep == 0 and not need_corr) else c
        sys = assemble_transport(mesh, state, bcs, dt, time_scheme,
                                 sources, c_expl=c_expl, phiD=phiD)
        c = solve(sys, x0=c, tol=tol, max_iter=max_iter).x
    # outward boundary flux of the exact system the returned c solves;
    # this is what the discrete mass balance telescopes against
    state.boundary_outflux = {
        name: ab[0] * c[mesh.patches[name].cells] - ab[1]
        for name, ab in sys.bc_terms.items()}
    if commit:
        commit_transport_step(state, c, dt)
    return c


def _has_cross_terms(phiD):
    return np.any(np.abs(phiD[:, 3:]) > 0.0)


def commit_transport_step(state, c_new, dt):
    state.c_old2 = state.c_old.copy()
    state.dt_old = dt
    state.c_old = np.asarray(c_new).copy()
    state.c = np.asarray(c_new).copy()


def boundary_solute_flux(mesh, state, bcs, c, velocity=None):
    """Outward solute flux per patch, with the assembled coefficients."""
    if velocity is None:
        from .flow import cell_velocity
        velocity = cell_velocity(mesh, state.phi_f, state.phi_b)
    phiD = cell_diffusion_tensor(state, velocity)
    _, TDb = _face_normal_diffusivity(mesh, phiD)
    corr_b = None
    if _has_cross_terms(phiD):
        _, corr_b = _cross_diffusion_correction(mesh, phiD, c)
    ctx = {"TDb": TDb, "phi_b": state.phi_b}
    out = {}
    for name, patch in mesh.patches.items():
        a, b = bcs[name].coefficients(mesh, patch, ctx)
        out[name] = a * c[patch.cells] - b
        if corr_b is not None and bcs[name].kind == "fixedValue":
            out[name] = out[name] - corr_b[name]
    return out


def adaptive_dt(mesh, state, co_max, dt_prev, dt_min=1e-12, dt_max=np.inf,
                growth=1.2):
    """Courant-limited time step from the total outgoing face fluxes."""
    outgoing = np.zeros(mesh.n_cells)
    phi = state.phi_f
    np.add.at(outgoing, mesh.f_owner, np.maximum(phi, 0.0))
    np.add.at(outgoing, mesh.f_neigh, np.maximum(-phi, 0.0))
    for name, patch in mesh.patches.items():
        np.add.at(outgoing, patch.cells,
                  np.maximum(state.phi_b[name], 0.0))
    V = mesh.cell_volume
    with np.errstate(divide="ignore"):
        limit = np.where(outgoing > 0.0,
                         co_max * state.porosity * V
                         / np.where(outgoing > 0.0, outgoing, 1.0), np.inf)
    cell = int(np.argmin(limit))
    dt = min(dt_max, growth * dt_prev, float(np.min(limit)))
    if dt < dt_min:
        raise TransportError(f"required time step {dt:.3e} < dt_min "
                             f"{dt_min:.3e}; limiting cell {cell}")
    return dt
