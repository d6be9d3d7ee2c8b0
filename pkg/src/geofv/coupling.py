"""Picard coupling of variable-density Darcy flow and solute transport.

Each time step iterates: update rho(c) and mu(c), solve the pressure
equation, reconstruct face fluxes, take the implicit transport step, and
under-relax the concentration until the change between successive
transport solutions falls below the tolerance.  The last iteration is
unrelaxed (configurable) so relaxation never delays the dynamics, and
fields are committed only when the step exits.
"""

import logging

import numpy as np

from .flow import assemble_pressure, darcy_flux
from .linsolve import ilu_operator, solve
from .transport import (adaptive_dt, advance_transport,
                        boundary_solute_flux, commit_transport_step)

log = logging.getLogger(__name__)


class CouplingError(RuntimeError):
    pass


class PicardControls:
    """Outer-iteration knobs for the flow-transport coupling."""

    def __init__(self, relax=0.7, tol=1e-6, max_outer=50,
                 final_sweep_unrelaxed=True, lin_tol=1e-10,
                 lin_max_iter=5000, lin_precond="jacobi"):
        if not 0.0 < relax <= 1.0:
            raise CouplingError(f"relax must be in (0, 1], got {relax}")
        if max_outer < 1:
            raise CouplingError(f"max_outer must be >= 1, got {max_outer}")
        if lin_precond not in ("jacobi", "ilu"):
            raise CouplingError(f"lin_precond must be jacobi or ilu, "
                                f"got {lin_precond!r}")
        self.relax = float(relax)
        self.tol = float(tol)
        self.max_outer = int(max_outer)
        self.final_sweep_unrelaxed = bool(final_sweep_unrelaxed)
        self.lin_tol = float(lin_tol)
        self.lin_max_iter = int(lin_max_iter)
        self.lin_precond = lin_precond


class CoupledModel:
    """Everything one coupled step needs, bound together.

    ``rho_model`` and ``mu_model`` map concentration to fluid density and
    viscosity (see :class:`geofv.constitutive.FluidPropertyModel`).
    ``c_scale`` normalizes the outer convergence check; it defaults to
    max(|c|, 1).
    """

    def __init__(self, mesh, flow_state, transport_state, bcs_flow,
                 bcs_transport, rho_model, mu_model,
                 formulation="reduced", continuity="boussinesq",
                 pin=None, c_scale=None, time_scheme="euler"):
        self.mesh = mesh
        self.flow = flow_state
        self.transport = transport_state
        self.bcs_flow = bcs_flow
        self.bcs_transport = bcs_transport
        self.rho_model = rho_model
        self.mu_model = mu_model
        self.formulation = formulation
        self.continuity = continuity
        self.pin = pin
        self.c_scale = c_scale
        self.time_scheme = time_scheme

    def update_fluid(self, c):
        self.flow.rho[:] = self.rho_model(c)
        self.flow.mu[:] = self.mu_model(c)


class StepResult:
    def __init__(self, outer, change, converged, flow_iters, dt):
        self.outer = outer
        self.change = change
        self.converged = converged
        self.flow_iters = flow_iters
        self.dt = dt


def _drho_dc(model, c):
    """Numerical derivative of the density law at the current state."""
    delta = max(1e-6 * float(np.max(np.abs(c))), 1e-9)
    return (np.asarray(model.rho_model(c + delta))
            - np.asarray(model.rho_model(c - delta))) / (2.0 * delta)


def _compressible_rhs(model, c_iter, dt):
    """Lagged right-hand side of Eq. for div(v): density-change terms.

    Per cell: -(drho/dc / rho) (phi dc/dt + v.grad c) V with the material
    terms evaluated at the previous outer iterate and current fluxes.
    """
    mesh = model.mesh
    tr = model.transport
    dcdt = (c_iter - tr.c_old) / dt
    # v.grad c = div(v c) - c div(v), upwind face concentrations
    phi = tr.phi_f
    o, nb = mesh.f_owner, mesh.f_neigh
    c_up = np.where(phi >= 0.0, c_iter[o], c_iter[nb])
    div_vc = np.zeros(mesh.n_cells)
    div_v = np.zeros(mesh.n_cells)
    np.add.at(div_vc, o, phi * c_up)
    np.add.at(div_vc, nb, -phi * c_up)
    np.add.at(div_v, o, phi)
    np.add.at(div_v, nb, -phi)
    for name, patch in mesh.patches.items():
        pb = tr.phi_b[name]
        np.add.at(div_vc, patch.cells, pb * c_iter[patch.cells])
        np.add.at(div_v, patch.cells, pb)
    v_grad_c = div_vc - c_iter * div_v          # already volume-integrated
    V = mesh.cell_volume
    rho = np.asarray(model.rho_model(c_iter))
    return -(_drho_dc(model, c_iter) / rho) * (tr.porosity * dcdt * V
                                               + v_grad_c)


def _flow_sweep(model, controls, dt, c_iter):
    extra = None
    if model.continuity == "compressible":
        extra = _compressible_rhs(model, c_iter, dt)
    sys = assemble_pressure(model.mesh, model.flow, model.bcs_flow,
                            formulation=model.formulation,
                            continuity=model.continuity,
                            dt=dt if model.continuity == "compressible"
                            else None,
                            p_old=model.flow.p,
                            extra_rhs=extra, pin=model.pin)
    if controls.lin_precond == "ilu":
        # freeze the ILU factor across outer iterations and steps; the
        # operator drifts with mu(c)/rho(c), so refresh it whenever the
        # Krylov iteration count degrades
        op = getattr(model, "_flow_precond", None)
        if op is None:
            op = ilu_operator(sys)
            model._flow_precond = op
        res = solve(sys, x0=model.flow.p, tol=controls.lin_tol,
                    max_iter=controls.lin_max_iter, precond_op=op)
        if res.iterations > 40 or not res.converged:
            op = ilu_operator(sys)
            model._flow_precond = op
            res = solve(sys, x0=res.x, tol=controls.lin_tol,
                        max_iter=controls.lin_max_iter, precond_op=op)
    else:
        res = solve(sys, x0=model.flow.p, tol=controls.lin_tol,
                    max_iter=controls.lin_max_iter)
    model.flow.p = res.x
    phi, phi_b = darcy_flux(model.mesh, model.flow, res.x, model.bcs_flow,
                            formulation=model.formulation)
    model.transport.phi_f = phi
    model.transport.phi_b = phi_b
    model.flow.phi_f = phi
    model.flow.phi_b = phi_b
    return res.iterations


def _transport_sweep(model, controls, dt):
    return advance_transport(model.mesh, model.transport,
                             model.bcs_transport, dt,
                             time_scheme=model.time_scheme,
                             tol=controls.lin_tol,
                             max_iter=controls.lin_max_iter,
                             commit=False)


def advance_step(model, dt, controls=None, _retry=True):
    """One coupled time step; commits concentration history on success.

    If the outer change grows over 5 consecutive iterations the step is
    retried once with dt halved, then aborted with diagnostics.
    """
    if controls is None:
        controls = PicardControls()
    tr = model.transport
    c_iter = tr.c.copy()
    scale = model.c_scale
    if scale is None:
        scale = max(float(np.max(np.abs(c_iter))), 1.0)
    flow_iters = 0
    converged = False
    outer = 0
    change = np.inf
    c_solve_prev = None
    growth_streak = 0
    prev_change = None
    for outer in range(1, controls.max_outer + 1):
        model.update_fluid(c_iter)
        rho_used = model.flow.rho.copy()
        mu_used = model.flow.mu.copy()
        flow_iters += _flow_sweep(model, controls, dt, c_iter)
        c_new = _transport_sweep(model, controls, dt)

        # fixed point is immediate when the properties do not react to
        # the transported field at all (uncoupled problem)
        prop_change = max(
            float(np.max(np.abs(model.rho_model(c_new) - rho_used)))
            / max(float(np.max(np.abs(rho_used))), 1e-300),
            float(np.max(np.abs(model.mu_model(c_new) - mu_used)))
            / max(float(np.max(np.abs(mu_used))), 1e-300))
        if c_solve_prev is not None:
            change = float(np.max(np.abs(c_new - c_solve_prev))) / scale
        if prop_change < 1e-14 or change < controls.tol:
            converged = True
            c_iter = c_new if controls.final_sweep_unrelaxed \
                else controls.relax * c_new + (1.0 - controls.relax) * c_iter
            break
        if prev_change is not None and np.isfinite(change):
            growth_streak = growth_streak + 1 if change > prev_change else 0
            if growth_streak >= 5:
                if _retry:
                    log.warning("outer loop diverging (change %.3e); "
                                "retrying with dt = %.3e", change, 0.5 * dt)
                    return advance_step(model, 0.5 * dt, controls,
                                        _retry=False)
                raise CouplingError(
                    f"Picard divergence: change grew for 5 consecutive "
                    f"iterations (last {change:.3e}) at dt={dt:.3e}")
        if np.isfinite(change):
            prev_change = change
        c_solve_prev = c_new
        c_iter = controls.relax * c_new + (1.0 - controls.relax) * c_iter
    if not converged:
        log.warning("Picard loop stalled at change %.3e after %d outers",
                    change, outer)
        if controls.final_sweep_unrelaxed:
            model.update_fluid(c_iter)
            flow_iters += _flow_sweep(model, controls, dt, c_iter)
            c_iter = _transport_sweep(model, controls, dt)
    # leave the flow consistent with the committed concentration
    model.update_fluid(c_iter)
    flow_iters += _flow_sweep(model, controls, dt, c_iter)
    commit_transport_step(tr, c_iter, dt)
    return StepResult(outer, change, converged, flow_iters, dt)


class TimeControls:
    def __init__(self, t_end, dt0, co_max=0.5, dt_min=1e-12, dt_max=np.inf,
                 growth=1.2, adaptive=True):
        if t_end <= 0.0 or dt0 <= 0.0:
            raise CouplingError("t_end and dt0 must be positive")
        self.t_end = float(t_end)
        self.dt0 = float(dt0)
        self.co_max = float(co_max)
        self.dt_min = float(dt_min)
        self.dt_max = float(dt_max)
        self.growth = float(growth)
        self.adaptive = bool(adaptive)


def run_coupled(model, time_controls, picard=None, observers=()):
    """Advance the coupled model to t_end.

    ``observers`` are callables ``f(t, dt, model, step_result)`` invoked
    after every committed step (output writers, diagnostics).  Returns
    the number of steps taken.
    """
    t = 0.0
    dt = time_controls.dt0
    n_steps = 0
    while t < time_controls.t_end * (1.0 - 1e-12):
        if time_controls.adaptive and n_steps > 0:
            dt = adaptive_dt(model.mesh, model.transport,
                             time_controls.co_max, dt,
                             dt_min=time_controls.dt_min,
                             dt_max=time_controls.dt_max,
                             growth=time_controls.growth)
        dt = min(dt, time_controls.t_end - t)
        result = advance_step(model, dt, picard)
        t += result.dt          # a divergence retry may have halved it
        n_steps += 1
        for obs in observers:
            obs(t, result.dt, model, result)
    return n_steps


# -- diagnostics --------------------------------------------------------


def rayleigh_number(k, g, delta_rho, height, porosity, mu, diffusivity):
    """Porous-medium Rayleigh number k g drho H / (phi mu D)."""
    denom = porosity * mu * diffusivity
    if denom == 0.0:
        raise CouplingError("rayleigh_number: zero denominator "
                            "(porosity, mu, diffusivity must be nonzero)")
    ra = (k * g * delta_rho * height) / denom
    if abs(ra - 4.0 * np.pi ** 2) < 0.5:
        log.info("Ra = %.3f is marginal (stability threshold 4 pi^2)", ra)
    return ra


def nusselt_number(model, patch_name, delta_c, height):
    """Ratio of the actual patch solute/heat flux to pure conduction.

    The conductive reference is phi * Dm * delta_c / height integrated
    over the patch area.
    """
    mesh = model.mesh
    tr = model.transport
    flux = boundary_solute_flux(mesh, tr, model.bcs_transport, tr.c)
    patch = mesh.patches[patch_name]
    total = float(np.sum(flux[patch_name]))
    area = float(np.sum(patch.area))
    Dm = float(np.mean(np.asarray(tr.dispersion.Dm)))
    phi = float(np.mean(tr.porosity))
    ref = phi * Dm * delta_c / height * area
    if ref == 0.0:
        raise CouplingError("conductive reference flux is zero")
    return abs(total) / ref
