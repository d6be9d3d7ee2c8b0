import numpy as np
import pytest

from geofv.mesh import build_cartesian
from geofv.constitutive import DispersionParameters, FluidPropertyModel
from geofv.flow import FlowState, NoFlux
from geofv.transport import (FixedConcentration, NoFluxTransport,
                             TransportState)
from geofv.coupling import (CoupledModel, CouplingError, PicardControls,
                            TimeControls, advance_step, nusselt_number,
                            rayleigh_number, run_coupled)

K, MU, PHI, DM, RHO0, G = 1e-9, 1e-3, 0.1, 1e-6, 1000.0, 9.81


def _hrl_model(Ra, nx=24, ny=12, continuity="boussinesq"):
    H, L = 1.0, 2.0
    drho = Ra * PHI * MU * DM / (K * G * H)
    mesh = build_cartesian(nx, ny, 1, (L, H, 1.0))
    x, y = mesh.cell_centers[:, 0], mesh.cell_centers[:, 1]
    T0 = 1.0 - y / H + 0.01 * np.sin(2 * np.pi * x / L) * np.sin(np.pi * y / H)
    fs = FlowState(mesh, K, MU, RHO0, g=(0.0, -G, 0.0))
    ts = TransportState(mesh, T0, porosity=PHI,
                        dispersion=DispersionParameters(Dm=DM))
    bf = {n: NoFlux() for n in mesh.patches}
    bt = {n: NoFluxTransport() for n in mesh.patches}
    bt["ymin"] = FixedConcentration(1.0)
    bt["ymax"] = FixedConcentration(0.0)
    rho_m = FluidPropertyModel("linear", f0=RHO0 + drho, slope=-drho)
    mu_m = FluidPropertyModel("constant", f0=MU)
    return CoupledModel(mesh, fs, ts, bf, bt, rho_m, mu_m,
                        continuity=continuity, pin=(0, 0.0), c_scale=1.0)


def test_rayleigh_number_value():
    ra = rayleigh_number(K, G, 1.0, 1.0, PHI, MU, DM)
    assert ra == pytest.approx(K * G / (PHI * MU * DM))
    with pytest.raises(CouplingError):
        rayleigh_number(K, G, 1.0, 1.0, 0.0, MU, DM)


def test_uncoupled_properties_single_outer():
    # constant rho and mu: the flow does not depend on c, so the Picard
    # loop must exit after one outer iteration
    model = _hrl_model(100.0)
    model.rho_model = FluidPropertyModel("constant", f0=RHO0)
    res = advance_step(model, 100.0, PicardControls())
    assert res.converged
    assert res.outer == 1


def test_picard_converges_and_bounds():
    model = _hrl_model(100.0)
    pc = PicardControls(relax=0.7, tol=1e-6)
    for _ in range(3):
        res = advance_step(model, 500.0, pc)
        assert res.converged
        assert res.outer <= 10
    c = model.transport.c
    assert c.min() >= -1e-8 and c.max() <= 1.0 + 1e-8


def test_relaxation_independence():
    # the converged step must not depend on the relaxation factor
    out = {}
    for relax in (0.5, 1.0):
        model = _hrl_model(100.0)
        advance_step(model, 500.0, PicardControls(relax=relax, tol=1e-12))
        out[relax] = model.transport.c.copy()
    assert np.max(np.abs(out[0.5] - out[1.0])) < 1e-8


def test_boussinesq_vs_compressible_incompressible_limit():
    # with S0 = 0 and weak density contrast the two continuity closures
    # give nearly identical fluxes
    ca = _hrl_model(50.0, continuity="boussinesq")
    cb = _hrl_model(50.0, continuity="compressible")
    advance_step(ca, 500.0, PicardControls(tol=1e-10))
    advance_step(cb, 500.0, PicardControls(tol=1e-10))
    scale = np.max(np.abs(ca.flow.phi_f)) + 1e-300
    assert np.max(np.abs(ca.flow.phi_f - cb.flow.phi_f)) / scale < 1e-3


def test_run_coupled_and_observers():
    model = _hrl_model(100.0)
    seen = []
    n = run_coupled(model, TimeControls(t_end=2e3, dt0=500.0, dt_max=1e3),
                    PicardControls(),
                    observers=[lambda t, dt, m, r: seen.append((t, dt))])
    assert n == len(seen)
    assert seen[-1][0] == pytest.approx(2e3)
    assert all(dt <= 1e3 + 1e-9 for _, dt in seen)


def test_subcritical_decays_to_conduction():
    model = _hrl_model(30.0)
    run_coupled(model, TimeControls(t_end=2e5, dt0=500.0, dt_max=2e4),
                PicardControls())
    nu = nusselt_number(model, "ymax", 1.0, 1.0)
    assert nu == pytest.approx(1.0, abs=2e-2)
    y = model.mesh.cell_centers[:, 1]
    assert np.max(np.abs(model.transport.c - (1.0 - y))) < 2e-2


def test_supercritical_nusselt_exceeds_one():
    model = _hrl_model(200.0)
    run_coupled(model, TimeControls(t_end=1e5, dt0=500.0, dt_max=5e3),
                PicardControls())
    assert nusselt_number(model, "ymax", 1.0, 1.0) > 1.1


def test_picard_controls_validation():
    with pytest.raises(CouplingError):
        PicardControls(relax=0.0)
    with pytest.raises(CouplingError):
        PicardControls(max_outer=0)
    with pytest.raises(CouplingError):
        TimeControls(t_end=-1.0, dt0=1.0)
