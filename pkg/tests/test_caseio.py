import numpy as np
import pytest
import yaml

from geofv import caseio
from geofv.caseio import (CaseError, build_bcs, build_dual_porosity,
                          build_initial, build_mesh, build_model,
                          build_time_controls, dual_porosity_masks,
                          fracture_pattern, parse_case, parse_dict)
from geofv.flow import DarcyFixedVelocity, FixedPressure, NoFlux
from geofv.mesh import build_cartesian
from geofv.transport import FixedConcentration, ZeroGradient

CASE_DIR = caseio.os.path.join(caseio.os.path.dirname(caseio.__file__),
                               "cases")
ALL_CASES = sorted(f for f in caseio.os.listdir(CASE_DIR)
                   if f.endswith(".yaml"))

MINIMAL = {
    "mesh": {"n": [8, 4, 1], "lengths": [2.0, 1.0, 1.0]},
    "fields": {"permeability": 1e-12, "porosity": 0.3},
    "fluid": {"rho": {"model": "constant", "f0": 1000.0},
              "mu": {"model": "constant", "f0": 1e-3}},
    "bc": {"flow": {"xmin": {"type": "fixedPressure", "value": 1e5},
                    "xmax": {"type": "fixedPressure", "value": 0.0}},
           "transport": {"xmin": {"type": "fixedValue", "value": 1.0},
                         "xmax": {"type": "zeroGradient"}}},
    "transport": {"Dm": 1e-9},
}


def test_all_bundled_cases_parse():
    assert len(ALL_CASES) == 8
    for name in ALL_CASES:
        cfg = parse_case(caseio.os.path.join(CASE_DIR, name))
        assert "mesh" in cfg.data


def test_canonical_roundtrip():
    for name in ALL_CASES:
        cfg = parse_case(caseio.os.path.join(CASE_DIR, name))
        text = cfg.canonical_yaml()
        again = parse_dict(yaml.safe_load(text))
        assert again.data == cfg.data
        assert again.canonical_yaml() == text


def test_include_merge_file_wins(tmp_path):
    base = tmp_path / "base.yaml"
    base.write_text(yaml.safe_dump({
        "mesh": {"n": [4, 4, 1], "lengths": [1.0, 1.0, 1.0]},
        "fields": {"permeability": 1e-12},
        "time": {"t_end": 10.0, "dt0": 1.0},
    }))
    child = tmp_path / "child.yaml"
    child.write_text(yaml.safe_dump({
        "include": ["base.yaml"],
        "mesh": {"n": [8, 8, 1]},
        "time": {"t_end": 20.0},
    }))
    cfg = parse_case(str(child))
    assert cfg["mesh"]["n"] == [8, 8, 1]
    assert cfg["mesh"]["lengths"] == [1.0, 1.0, 1.0]   # inherited
    assert cfg["time"]["t_end"] == 20.0                # overridden
    assert cfg["time"]["dt0"] == 1.0                   # inherited


def test_missing_include(tmp_path):
    child = tmp_path / "c.yaml"
    child.write_text("include: [nope.yaml]\n")
    with pytest.raises(CaseError, match="nope.yaml"):
        parse_case(str(child))


def test_unknown_key_suggestion():
    with pytest.raises(CaseError, match="lengths"):
        parse_dict({"mesh": {"n": [2, 2, 1], "lenths": [1, 1, 1]}})


def test_type_error_reported():
    with pytest.raises(CaseError, match="expected"):
        parse_dict({"mesh": {"n": [2, 2, 1], "lengths": [1, 1, 1]},
                    "transport": {"Dm": "big"}})


def test_unknown_patch():
    bad = dict(MINIMAL)
    bad = yaml.safe_load(yaml.safe_dump(MINIMAL))
    bad["bc"]["flow"]["xmiin"] = {"type": "noFlux"}
    with pytest.raises(CaseError):
        parse_dict(bad)


def test_build_mesh_and_defaults():
    cfg = parse_dict(yaml.safe_load(yaml.safe_dump(MINIMAL)))
    mesh = build_mesh(cfg)
    assert (mesh.nx, mesh.ny, mesh.nz) == (8, 4, 1)
    assert np.allclose(mesh.lengths, [2.0, 1.0, 1.0])
    # defaults resolved
    assert cfg["flow"]["formulation"] == "reduced"
    assert cfg["time"]["co_max"] == 0.5
    assert cfg["picard"]["relax"] == 0.7


def test_build_bcs_types():
    cfg = parse_dict(yaml.safe_load(yaml.safe_dump(MINIMAL)))
    bf = build_bcs(cfg, "flow")
    assert isinstance(bf["xmin"], FixedPressure)
    assert isinstance(bf["ymin"], NoFlux)        # default
    bt = build_bcs(cfg, "transport")
    assert isinstance(bt["xmin"], FixedConcentration)
    assert isinstance(bt["xmax"], ZeroGradient)


def test_bc_missing_parameter():
    bad = yaml.safe_load(yaml.safe_dump(MINIMAL))
    del bad["bc"]["flow"]["xmin"]["value"]
    cfg = parse_dict(bad)
    with pytest.raises(CaseError, match="value"):
        build_bcs(cfg, "flow")


def test_bc_unknown_type():
    bad = yaml.safe_load(yaml.safe_dump(MINIMAL))
    bad["bc"]["flow"]["xmin"]["type"] = "fixedPresure"
    cfg = parse_dict(bad)
    with pytest.raises(CaseError, match="fixedPressure"):
        build_bcs(cfg, "flow")


def test_build_model_minimal():
    cfg = parse_dict(yaml.safe_load(yaml.safe_dump(MINIMAL)))
    model = build_model(cfg)
    assert model.mesh.n_cells == 32
    assert model.flow.K == pytest.approx(1e-12)
    assert np.all(model.transport.c == 0.0)
    assert isinstance(model.bcs_flow["xmin"], FixedPressure)


def test_build_model_geostat_field():
    data = yaml.safe_load(yaml.safe_dump(MINIMAL))
    data["fields"]["permeability"] = "logk"
    data["geostat"] = {"logk": {
        "type": "continuous", "correlation": "gaussian",
        "Kmean": -27.6, "Ksigma": 1.0, "Lcorr": [0.5, 0.25, 1.0],
        "nfreq": [16, 16, 1], "lognormal": True, "seed": 3,
    }}
    cfg = parse_dict(data)
    m1 = build_model(cfg, seed=3)
    m2 = build_model(cfg, seed=3)
    m3 = build_model(cfg, seed=4)
    assert np.array_equal(m1.flow.K, m2.flow.K)
    assert not np.array_equal(m1.flow.K, m3.flow.K)
    assert np.all(m1.flow.K > 0.0)    # lognormal


def test_geostat_unknown_block_name():
    data = yaml.safe_load(yaml.safe_dump(MINIMAL))
    data["fields"]["permeability"] = "logk"
    data["geostat"] = {"logK": {"type": "continuous"}}
    cfg = parse_dict(data)
    with pytest.raises(CaseError, match="logK"):
        build_model(cfg)


def test_initial_uniform_profile_step():
    data = yaml.safe_load(yaml.safe_dump(MINIMAL))
    mesh = build_cartesian(8, 4, 1, (2.0, 1.0, 1.0))

    data["transport"]["initial"] = {"type": "uniform", "value": 0.25}
    c = build_initial(parse_dict(data), mesh)
    assert np.all(c == 0.25)

    data["transport"]["initial"] = {"type": "profile", "axis": "x",
                                    "from": 1.0, "to": 0.0}
    c = build_initial(parse_dict(data), mesh)
    x = mesh.cell_centers[:, 0]
    assert np.allclose(c, 1.0 - x / 2.0)

    data["transport"]["initial"] = {"type": "step", "axis": "x",
                                    "position": 1.0, "left": 2.0,
                                    "right": -1.0}
    c = build_initial(parse_dict(data), mesh)
    assert set(np.unique(c)) == {2.0, -1.0}
    assert np.all(c[x < 1.0] == 2.0)

    data["transport"]["initial"] = {"type": "blob"}
    with pytest.raises(CaseError):
        build_initial(parse_dict(data), mesh)


def test_step_perturbation_seeded():
    data = yaml.safe_load(yaml.safe_dump(MINIMAL))
    data["mesh"]["n"] = [64, 32, 1]
    data["transport"]["initial"] = {"type": "step", "axis": "x",
                                    "position": 1.0,
                                    "perturb_amplitude": 0.05,
                                    "perturb_modes": 8, "perturb_seed": 5}
    cfg = parse_dict(data)
    mesh = build_mesh(cfg)
    c1 = build_initial(cfg, mesh)
    c2 = build_initial(cfg, mesh)
    assert np.array_equal(c1, c2)
    # the interface is actually perturbed: not a function of x alone
    shaped = c1.reshape(32, 64)
    assert np.any(shaped.std(axis=0) > 0.0)


def test_time_controls_required():
    cfg = parse_dict(yaml.safe_load(yaml.safe_dump(MINIMAL)))
    with pytest.raises(CaseError, match="t_end"):
        build_time_controls(cfg)
    data = yaml.safe_load(yaml.safe_dump(MINIMAL))
    data["time"] = {"t_end": 100.0, "dt0": 1.0, "dt_max": 10.0}
    tc = build_time_controls(parse_dict(data))
    assert tc.t_end == 100.0 and tc.dt_max == 10.0


def test_fracture_pattern_cross():
    mesh = build_cartesian(10, 10, 1, (1.0, 1.0, 1.0))
    fcfg = {"pattern": "cross", "permeability": 1e-7,
            "background_permeability": 1e-20, "width_cells": 2}
    K = fracture_pattern(mesh, fcfg)
    mask = dual_porosity_masks(mesh, fcfg)
    assert K.shape == (100, 3)
    # band cells conduct along their own axis, background elsewhere
    assert np.all(K[~mask] == 1e-20)
    ii = np.arange(100) % 10
    jj = np.arange(100) // 10
    horizontal = (jj == 4) | (jj == 5)
    vertical = (ii == 4) | (ii == 5)
    assert np.all(K[horizontal, 0] == 1e-7)
    assert np.all(K[vertical, 1] == 1e-7)
    assert np.all(K[horizontal & ~vertical, 1] == 1e-20)
    with pytest.raises(CaseError):
        fracture_pattern(mesh, {"pattern": "herringbone"})


def test_build_dual_porosity():
    cfg = parse_case(caseio.os.path.join(CASE_DIR, "fivespot_dual.yaml"))
    mesh = build_mesh(cfg)
    dual = build_dual_porosity(cfg, mesh)
    assert dual.tau0 == pytest.approx(1e-5)
    assert dual.matrix.K == pytest.approx(1e-11)
    assert dual.fracture.K.shape == (mesh.n_cells, 3)
    assert len(dual.matrix.sources) == 2
    q = sorted(s.q for s in dual.matrix.sources)
    assert q == [-1e-5, 1e-5]

    no_dual = parse_dict(yaml.safe_load(yaml.safe_dump(MINIMAL)))
    with pytest.raises(CaseError, match="dual_porosity"):
        build_dual_porosity(no_dual, mesh)


def test_sources_by_position_and_cell():
    data = yaml.safe_load(yaml.safe_dump(MINIMAL))
    data["sources"] = [{"position": [0.125, 0.125, 0.5], "q": 1e-6},
                       {"cell": 31, "q": -1e-6}]
    cfg = parse_dict(data)
    mesh = build_mesh(cfg)
    model = build_model(cfg)
    src = model.flow.sources
    assert src[0].cells.tolist() == [0]    # nearest cell to the corner
    assert src[1].cells.tolist() == [31]
    data["sources"] = [{"q": 1e-6}]
    with pytest.raises(CaseError, match="cell or position"):
        build_model(parse_dict(data))


def test_darcy_velocity_bc_from_case():
    data = yaml.safe_load(yaml.safe_dump(MINIMAL))
    data["bc"]["flow"]["xmin"] = {"type": "darcyFixedVelocity",
                                  "velocity": 1e-5}
    bf = build_bcs(parse_dict(data), "flow")
    assert isinstance(bf["xmin"], DarcyFixedVelocity)
