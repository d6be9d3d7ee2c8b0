"""Declarative case files: parsing, validation, and model construction.

Cases are YAML trees.  Unknown keys are hard errors (with a nearest-key
suggestion); a parsed case re-serializes to a canonical form that parses
back to itself.  A top-level ``include`` list merges other case files
underneath the current one (the current file wins key by key).

Units: SI throughout — lengths m, time s, pressure Pa, permeability m^2,
viscosity Pa s, density kg/m^3, concentration kg/m^3, rates 1/s.
"""

import difflib
import os

import numpy as np
import yaml

from .constitutive import DispersionParameters, FluidPropertyModel
from .coupling import CoupledModel, PicardControls, TimeControls
from .flow import (CellSource, DarcyFixedVelocity, DualPorosityState,
                   FixedPressure, FlowState, HydrostaticPressure, NoFlux,
                   RobinPressure)
from .geostat import (CovarianceModel, TruncationRule, bitruncate,
                      generate_grf, sample_frequencies, scale_field, truncate)
from .mesh import build_cartesian
from .transport import (FixedConcentration, FixedTransportFlux, InletOutlet,
                        NoFluxTransport, TransportState, ZeroGradient)

PATCHES = ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")


class CaseError(ValueError):
    pass


# -- schema -------------------------------------------------------------
# Leaves are python types (or tuples of accepted types); "*" keys apply
# to every child.  None as a leaf means "any scalar/list" (checked by the
# builder).

_FLUID_KEYS = {"model": str, "f0": (int, float), "slope": (int, float),
               "exponent": (int, float), "table": list}

_GEOSTAT_KEYS = {
    "type": str,            # continuous | truncated | bitruncated
    "correlation": str,     # gaussian | exponential | matern | spherical
    "Kmean": (int, float), "Ksigma": (int, float),
    "Lcorr": list, "nu": (int, float), "nfreq": (list, int),
    "disableY": bool, "disableZ": bool, "periodic": bool,
    "lognormal": bool, "seed": int, "eta": (int, float),
    "values": list, "thresholds": list, "thresholds2": list,
    "percentile": bool,
}

_BC_KEYS = {"type": str, "value": (int, float, list), "p_ref": (int, float),
            "rho_ref": (int, float), "x_ref": list,
            "velocity": (int, float), "alpha": (int, float),
            "beta": (int, float), "gamma": (int, float),
            "f_a": (int, float), "u_n": (int, float), "d": (int, float),
            "f_d": (int, float), "F": (int, float), "delta": (int, float)}

_INITIAL_KEYS = {"type": str, "value": (int, float), "axis": str,
                 "from": (int, float), "to": (int, float),
                 "position": (int, float), "left": (int, float),
                 "right": (int, float), "perturb_amplitude": (int, float),
                 "perturb_modes": int, "perturb_seed": int}

_SOURCE_KEYS = {"position": list, "cell": int, "q": (int, float),
                "rho_star": (int, float), "c_star": (int, float)}

_SCHEMA = {
    "title": str,
    "include": list,
    "mesh": {"n": list, "lengths": list, "origin": list},
    "fields": {"permeability": (int, float, str, list),
               "porosity": (int, float, str),
               "storativity": (int, float, str)},
    "geostat": {"*": _GEOSTAT_KEYS},
    "fluid": {"rho": _FLUID_KEYS, "mu": _FLUID_KEYS},
    "gravity": list,
    "flow": {"formulation": str, "continuity": str, "pin": list},
    "transport": {"Dm": (int, float), "alphaL": (int, float),
                  "alphaT": (int, float), "scheme": str,
                  "n_correctors": int,
                  "initial": dict((k, v) for k, v in _INITIAL_KEYS.items())},
    "bc": {"flow": {p: _BC_KEYS for p in PATCHES},
           "transport": {p: _BC_KEYS for p in PATCHES}},
    "sources": [_SOURCE_KEYS],
    "time": {"t_end": (int, float), "dt0": (int, float),
             "co_max": (int, float), "dt_min": (int, float),
             "dt_max": (int, float), "growth": (int, float),
             "adaptive": bool},
    "picard": {"relax": (int, float), "tol": (int, float),
               "max_outer": int, "final_sweep_unrelaxed": bool,
               "lin_tol": (int, float), "lin_max_iter": int,
               "lin_precond": str},
    "output": {"fields": list, "write_interval": (int, float),
               "metrics": list},
    "dual_porosity": {
        "scheme": str, "tau0": (int, float), "tol": (int, float),
        "max_outer": int,
        "matrix": {"permeability": (int, float, str, list),
                   "porosity": (int, float)},
        "fracture": {"pattern": str, "permeability": (int, float),
                     "width_cells": int, "porosity": (int, float),
                     "background_permeability": (int, float)},
    },
}

_DEFAULTS = {
    "title": "",
    "mesh": {"origin": [0.0, 0.0, 0.0]},
    "fields": {"porosity": 1.0, "storativity": 0.0},
    "gravity": [0.0, 0.0, 0.0],
    "flow": {"formulation": "reduced", "continuity": "boussinesq"},
    "transport": {"Dm": 0.0, "alphaL": 0.0, "alphaT": 0.0,
                  "scheme": "upwind", "n_correctors": 2,
                  "initial": {"type": "uniform", "value": 0.0}},
    "time": {"co_max": 0.5, "dt_min": 1e-12, "growth": 1.2,
             "adaptive": True},
    "picard": {"relax": 0.7, "tol": 1e-6, "max_outer": 50,
               "final_sweep_unrelaxed": True, "lin_tol": 1e-10,
               "lin_max_iter": 5000, "lin_precond": "jacobi"},
    "output": {"fields": ["c", "p"], "metrics": []},
}


def _suggest(key, known):
    close = difflib.get_close_matches(key, known, n=1)
    return f"; did you mean {close[0]!r}?" if close else ""


def _validate(node, schema, path):
    if isinstance(schema, dict):
        if not isinstance(node, dict):
            raise CaseError(f"{path or '<root>'}: expected a mapping, got "
                            f"{type(node).__name__}")
        known = [k for k in schema if k != "*"]
        for key, val in node.items():
            sub = schema.get(key, schema.get("*"))
            if sub is None:
                raise CaseError(f"unknown key {path + key!r}"
                                f"{_suggest(key, known)}")
            _validate(val, sub, path + key + ".")
        return
    if isinstance(schema, list):        # homogeneous list of mappings
        if not isinstance(node, list):
            raise CaseError(f"{path[:-1]!r}: expected a list")
        for i, item in enumerate(node):
            _validate(item, schema[0], f"{path[:-1]}[{i}].")
        return
    # schema is a type or tuple of types
    if node is None:
        return
    if not isinstance(node, schema):
        names = (schema.__name__ if isinstance(schema, type)
                 else "/".join(t.__name__ for t in schema))
        raise CaseError(f"{path[:-1]!r}: expected {names}, got "
                        f"{type(node).__name__} ({node!r})")


def _deep_merge(base, over):
    out = dict(base)
    for key, val in over.items():
        if key in out and isinstance(out[key], dict) and isinstance(val, dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = val
    return out


class CaseConfig:
    """Validated case tree with all defaults resolved."""

    def __init__(self, data, path=""):
        self.data = data
        self.path = path

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)

    def canonical_yaml(self):
        return yaml.safe_dump(self.data, sort_keys=True,
                              default_flow_style=None)


def _load_yaml(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" \
            if mark else ""
        raise CaseError(f"syntax error in {path}{where}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise CaseError(f"{path}: top level must be a mapping")
    return data


def parse_case(path):
    """Load, merge includes, validate, and resolve defaults."""
    data = _load_yaml(path)
    includes = data.pop("include", [])
    if not isinstance(includes, list):
        raise CaseError(f"{path}: 'include' must be a list of paths")
    base = {}
    for inc in includes:
        inc_path = os.path.join(os.path.dirname(path), inc)
        if not os.path.exists(inc_path):
            raise CaseError(f"{path}: include {inc!r} not found")
        base = _deep_merge(base, parse_case(inc_path).data)
    data = _deep_merge(base, data)
    return parse_dict(data, path)


def parse_dict(data, path="<dict>"):
    _validate(data, _SCHEMA, "")
    data = _deep_merge(_DEFAULTS, data)
    if "mesh" not in data or "n" not in data["mesh"] \
            or "lengths" not in data["mesh"]:
        raise CaseError(f"{path}: mesh.n and mesh.lengths are required")
    for which in ("flow", "transport"):
        bcs = data.get("bc", {}).get(which, {})
        for patch in bcs:
            if patch not in PATCHES:
                raise CaseError(f"bc.{which}.{patch}: unknown patch"
                                f"{_suggest(patch, PATCHES)}")
    return CaseConfig(data, path)


# -- builders -----------------------------------------------------------


def build_mesh(cfg):
    m = cfg["mesh"]
    n = [int(v) for v in m["n"]]
    if len(n) != 3:
        raise CaseError(f"mesh.n must have 3 entries, got {n}")
    return build_cartesian(n[0], n[1], n[2], m["lengths"],
                           m.get("origin", (0.0, 0.0, 0.0)))


def build_geostat_field(gcfg, mesh, seed=None, name="field"):
    """Generate one material field from an Appendix-B style block."""
    kind = gcfg.get("type", "continuous")
    if kind not in ("continuous", "truncated", "bitruncated"):
        raise CaseError(f"geostat type {kind!r} must be continuous, "
                        f"truncated or bitruncated")
    corr = gcfg.get("correlation", "gaussian")
    lam = gcfg.get("Lcorr", [1.0, 1.0, 1.0])
    disable_y = bool(gcfg.get("disableY", mesh.ny == 1))
    disable_z = bool(gcfg.get("disableZ", mesh.nz == 1))
    dim = 3 - int(disable_y) - int(disable_z)
    model = CovarianceModel(corr, sigma2=1.0, lam=lam,
                            nu=gcfg.get("nu"), dim=dim)
    nfreq = gcfg.get("nfreq", 64)
    nfreq = np.broadcast_to(np.asarray(nfreq, dtype=int), (3,)).copy()
    if disable_y:
        nfreq[1] = 1
    if disable_z:
        nfreq[2] = 1
    if seed is None:
        seed = int(gcfg.get("seed", 0))
    periodic = bool(gcfg.get("periodic", False))
    eta = float(gcfg.get("eta", 2.0))

    def grf(s):
        sampler = sample_frequencies(model, mesh, tuple(nfreq),
                                     periodic=periodic, eta=eta, seed=s)
        return generate_grf(sampler, mesh, name)

    if kind == "continuous":
        mean = float(gcfg.get("Kmean", 0.0))
        sigma = float(np.sqrt(gcfg.get("Ksigma", 1.0)))
        return scale_field(grf(seed), mean, sigma,
                           lognormal=bool(gcfg.get("lognormal", False)))
    values = gcfg.get("values")
    thresholds = gcfg.get("thresholds")
    if values is None or thresholds is None:
        raise CaseError(f"geostat {name!r}: {kind} needs values and "
                        f"thresholds")
    percentile = bool(gcfg.get("percentile", False))
    if kind == "truncated":
        rule = TruncationRule(thresholds, values, percentile=percentile)
        return truncate(grf(seed), rule)
    rule = TruncationRule(thresholds, values,
                          thresholds2=gcfg.get("thresholds2"),
                          percentile=percentile)
    return bitruncate(grf(seed), grf(seed + 1), rule)


def _resolve_field(cfg, mesh, value, seed=None, name="field"):
    """A number, per-axis list, or the name of a geostat block."""
    if isinstance(value, str):
        blocks = cfg.get("geostat", {})
        if value not in blocks:
            raise CaseError(f"fields.{name}: no geostat block named "
                            f"{value!r}{_suggest(value, list(blocks))}")
        return build_geostat_field(blocks[value], mesh, seed, value).values
    if isinstance(value, list):
        v = np.asarray(value, dtype=float)
        if v.shape != (3,):
            raise CaseError(f"fields.{name}: list form must have 3 "
                            f"diagonal entries, got {value}")
        return np.broadcast_to(v, (mesh.n_cells, 3)).copy()
    return float(value)


def build_fluid_model(block, which):
    if block is None:
        raise CaseError(f"fluid.{which} is required")
    kind = block.get("model")
    return FluidPropertyModel(kind, f0=block.get("f0"),
                              slope=block.get("slope", 0.0),
                              exponent=block.get("exponent", 0.0),
                              table=block.get("table"))


_FLOW_BC = {
    "noFlux": lambda b: NoFlux(),
    "fixedPressure": lambda b: FixedPressure(b["value"]),
    "hydrostaticPressure": lambda b: HydrostaticPressure(
        b.get("p_ref", 0.0), b["rho_ref"], b.get("x_ref", (0.0, 0.0, 0.0))),
    "darcyFixedVelocity": lambda b: DarcyFixedVelocity(b["velocity"]),
    "robin": lambda b: RobinPressure(b.get("alpha", 0.0),
                                     b.get("beta", 0.0),
                                     b.get("gamma", 0.0)),
}

_TRANSPORT_BC = {
    "noFlux": lambda b: NoFluxTransport(),
    "fixedValue": lambda b: FixedConcentration(b["value"]),
    "zeroGradient": lambda b: ZeroGradient(),
    "inletOutlet": lambda b: InletOutlet(b["value"]),
    "fixedTransportFlux": lambda b: FixedTransportFlux(
        f_a=b.get("f_a", 0.0), u_n=b.get("u_n"), d=b.get("d", 0.0),
        f_d=b.get("f_d", 0.0), F=b.get("F", 0.0), delta=b.get("delta")),
}


def build_bcs(cfg, which):
    table = _FLOW_BC if which == "flow" else _TRANSPORT_BC
    default = "noFlux"
    blocks = cfg.get("bc", {}).get(which, {})
    out = {}
    for patch in PATCHES:
        block = blocks.get(patch, {"type": default})
        kind = block.get("type", default)
        if kind not in table:
            raise CaseError(f"bc.{which}.{patch}: unknown type {kind!r}"
                            f"{_suggest(kind, list(table))}")
        try:
            out[patch] = table[kind](block)
        except KeyError as exc:
            raise CaseError(f"bc.{which}.{patch}: missing parameter "
                            f"{exc.args[0]!r} for type {kind!r}") from exc
    return out


def _perturbation(coords, extent, amplitude, modes, seed):
    """Seeded smooth multi-mode perturbation, bounded by amplitude."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    out = np.zeros_like(coords)
    for m in range(1, modes + 1):
        a = rng.standard_normal()
        phase = rng.random() * 2.0 * np.pi
        out += a * np.cos(2.0 * np.pi * m * coords / extent + phase)
    peak = np.max(np.abs(out))
    if peak > 0.0:
        out *= amplitude / peak
    return out


_AXES = {"x": 0, "y": 1, "z": 2}


def build_initial(cfg, mesh):
    block = cfg["transport"]["initial"]
    if isinstance(block, (int, float)):
        return np.full(mesh.n_cells, float(block))
    kind = block.get("type", "uniform")
    amp = float(block.get("perturb_amplitude", 0.0))
    modes = int(block.get("perturb_modes", 8))
    pseed = int(block.get("perturb_seed", 0))
    if kind == "uniform":
        return np.full(mesh.n_cells, float(block.get("value", 0.0)))
    axis = _AXES.get(block.get("axis", "x"))
    if axis is None:
        raise CaseError(f"transport.initial.axis must be x, y or z")
    coord = mesh.cell_centers[:, axis]
    lo = mesh.origin[axis]
    span = mesh.lengths[axis]
    if kind == "profile":
        v0, v1 = float(block.get("from", 0.0)), float(block.get("to", 0.0))
        c = v0 + (v1 - v0) * (coord - lo) / span
        if amp > 0.0:
            t_axis = 0 if axis != 0 else 1
            t = mesh.cell_centers[:, t_axis]
            shape = np.sin(np.pi * (coord - lo) / span)
            c = c + shape * _perturbation(t, mesh.lengths[t_axis], amp,
                                          modes, pseed)
        return c
    if kind == "step":
        pos = float(block.get("position", lo + 0.5 * span))
        left = float(block.get("left", 1.0))
        right = float(block.get("right", 0.0))
        interface = np.full(mesh.n_cells, pos)
        if amp > 0.0:
            t_axis = 0 if axis != 0 else 1
            t = mesh.cell_centers[:, t_axis]
            interface = interface + _perturbation(t, mesh.lengths[t_axis],
                                                  amp, modes, pseed)
        return np.where(coord < interface, left, right)
    raise CaseError(f"transport.initial.type {kind!r} must be uniform, "
                    f"profile or step{_suggest(kind, ['uniform', 'profile', 'step'])}")


def build_sources(cfg, mesh):
    out = []
    for i, block in enumerate(cfg.get("sources", []) or []):
        if "cell" in block and block["cell"] is not None:
            cell = int(block["cell"])
        elif "position" in block and block["position"] is not None:
            pos = np.asarray(block["position"], dtype=float)
            cell = int(np.argmin(np.sum((mesh.cell_centers - pos) ** 2,
                                        axis=1)))
        else:
            raise CaseError(f"sources[{i}]: needs cell or position")
        # q is a volumetric rate density [1/s] over the cell
        out.append(CellSource(cell, float(block["q"]),
                              rho_star=block.get("rho_star"),
                              c_star=float(block.get("c_star", 0.0))))
    return out


def build_model(cfg, mesh=None, seed=None):
    """Construct the coupled model plus its controls from a case."""
    if mesh is None:
        mesh = build_mesh(cfg)
    fields = cfg.get("fields", {})
    if "permeability" not in fields:
        raise CaseError("fields.permeability is required")
    K = _resolve_field(cfg, mesh, fields["permeability"], seed,
                       "permeability")
    phi = _resolve_field(cfg, mesh, fields.get("porosity", 1.0), seed,
                         "porosity")
    S0 = _resolve_field(cfg, mesh, fields.get("storativity", 0.0), seed,
                        "storativity")
    fluid = cfg.get("fluid", {})
    rho_model = build_fluid_model(fluid.get("rho"), "rho")
    mu_model = build_fluid_model(fluid.get("mu"), "mu")
    c0 = build_initial(cfg, mesh)
    g = np.asarray(cfg.get("gravity", [0.0, 0.0, 0.0]), dtype=float)

    fs = FlowState(mesh, K, mu_model(c0), rho_model(c0), S0=S0, g=g,
                   sources=build_sources(cfg, mesh))
    tcfg = cfg["transport"]
    ts = TransportState(mesh, c0, porosity=phi,
                        dispersion=DispersionParameters(
                            Dm=tcfg["Dm"], alphaL=tcfg["alphaL"],
                            alphaT=tcfg["alphaT"]),
                        scheme=tcfg["scheme"],
                        n_correctors=tcfg["n_correctors"])
    ts.sources = build_sources(cfg, mesh)

    fcfg = cfg["flow"]
    pin = fcfg.get("pin")
    if pin is not None:
        pin = (int(pin[0]), float(pin[1]))
    model = CoupledModel(mesh, fs, ts, build_bcs(cfg, "flow"),
                         build_bcs(cfg, "transport"), rho_model, mu_model,
                         formulation=fcfg["formulation"],
                         continuity=fcfg["continuity"], pin=pin)
    return model


def build_time_controls(cfg):
    t = cfg.get("time")
    if t is None or "t_end" not in t or "dt0" not in t:
        raise CaseError("time.t_end and time.dt0 are required to run")
    return TimeControls(t["t_end"], t["dt0"], co_max=t["co_max"],
                        dt_min=t["dt_min"],
                        dt_max=t.get("dt_max", np.inf),
                        growth=t["growth"], adaptive=t["adaptive"])


def build_picard(cfg):
    p = cfg["picard"]
    return PicardControls(relax=p["relax"], tol=p["tol"],
                          max_outer=p["max_outer"],
                          final_sweep_unrelaxed=p["final_sweep_unrelaxed"],
                          lin_tol=p["lin_tol"],
                          lin_max_iter=p["lin_max_iter"],
                          lin_precond=p["lin_precond"])


def build_dual_porosity(cfg, mesh=None, seed=None):
    """Dual-continuum pressure problem from the dual_porosity block."""
    if mesh is None:
        mesh = build_mesh(cfg)
    d = cfg.get("dual_porosity")
    if d is None:
        raise CaseError("case has no dual_porosity block")
    mcfg = d.get("matrix", {})
    fcfg = d.get("fracture", {})
    K_mat = _resolve_field(cfg, mesh, mcfg.get("permeability", 1e-12),
                           seed, "matrix permeability")
    fluid = cfg.get("fluid", {})
    rho_model = build_fluid_model(fluid.get("rho"), "rho")
    mu_model = build_fluid_model(fluid.get("mu"), "mu")
    rho = float(rho_model(0.0))
    mu = float(mu_model(0.0))
    g = np.asarray(cfg.get("gravity", [0.0, 0.0, 0.0]), dtype=float)
    sources = build_sources(cfg, mesh)
    matrix = FlowState(mesh, K_mat, mu, rho, g=g, sources=sources)
    K_frac = fracture_pattern(mesh, fcfg)
    fracture = FlowState(mesh, K_frac, mu, rho, g=g)
    return DualPorosityState(matrix, fracture, d.get("tau0", 0.0))


def fracture_pattern(mesh, fcfg):
    """Anisotropic fracture permeability as a diagonal (n, 3) tensor.

    ``cross``: one horizontal and one vertical fracture band through the
    domain center; each band is permeable only along its own axis.
    """
    pattern = fcfg.get("pattern", "cross")
    k_f = float(fcfg.get("permeability", 1e-7))
    k_bg = float(fcfg.get("background_permeability", 1e-20))
    width = int(fcfg.get("width_cells", 2))
    K = np.full((mesh.n_cells, 3), k_bg)
    if pattern == "none":
        return K
    if pattern != "cross":
        raise CaseError(f"fracture pattern {pattern!r} must be cross or "
                        f"none")
    ii = np.arange(mesh.n_cells) % mesh.nx
    jj = (np.arange(mesh.n_cells) // mesh.nx) % mesh.ny
    mid_i = (mesh.nx - width) // 2
    mid_j = (mesh.ny - width) // 2
    vertical = (ii >= mid_i) & (ii < mid_i + width)
    horizontal = (jj >= mid_j) & (jj < mid_j + width)
    K[vertical, 1] = k_f      # vertical band conducts along y
    K[horizontal, 0] = k_f    # horizontal band conducts along x
    return K


def dual_porosity_masks(mesh, fcfg):
    """Boolean fracture-region mask matching :func:`fracture_pattern`."""
    width = int(fcfg.get("width_cells", 2))
    ii = np.arange(mesh.n_cells) % mesh.nx
    jj = (np.arange(mesh.n_cells) // mesh.nx) % mesh.ny
    mid_i = (mesh.nx - width) // 2
    mid_j = (mesh.ny - width) // 2
    return ((ii >= mid_i) & (ii < mid_i + width)) | \
        ((jj >= mid_j) & (jj < mid_j + width))
