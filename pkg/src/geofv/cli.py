"""Command-line interface: genfield, run, pdf, metrics.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import caseio
from .caseio import CaseError
from .coupling import CouplingError, run_coupled
from .flow import cell_velocity, solve_dual_porosity
from .linsolve import SolverError
from .postproc import PostprocError, field_metrics, spatial_pdf
from .transport import TransportError
from .vtkio import VTKError, read_vtk, write_csv, write_vtk

log = logging.getLogger("geofv")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2

_CONFIG_ERRORS = (CaseError, VTKError, PostprocError, OSError)
_NUMERIC_ERRORS = (SolverError, CouplingError, TransportError,
                   FloatingPointError, ZeroDivisionError)


def _parser():
    p = argparse.ArgumentParser(
        prog="geofv",
        description="Structured-grid finite-volume toolkit for "
                    "heterogeneous porous-media flow and transport.")
    p.add_argument("-v", "--verbose", action="store_true",
                   help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("genfield", help="generate geostatistical fields "
                                        "from a case file")
    g.add_argument("case")
    g.add_argument("--seed", type=int, default=None,
                   help="override every geostat block's seed")
    g.add_argument("--output-dir", default=".")
    g.add_argument("--field", action="append", default=None,
                   help="generate only the named geostat block(s)")

    r = sub.add_parser("run", help="run a simulation case")
    r.add_argument("case")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--output-dir", default=".")
    r.add_argument("--write-interval", type=float, default=None,
                   help="override output.write_interval (simulated time)")
    r.add_argument("--t-end", type=float, default=None,
                   help="override time.t_end")

    h = sub.add_parser("pdf", help="histogram of a field in a VTK file")
    h.add_argument("vtk")
    h.add_argument("--field", required=True)
    h.add_argument("--bins", type=int, default=50)
    h.add_argument("--spacing", choices=("linear", "log"), default="linear")
    h.add_argument("--output", default=None,
                   help="CSV path (default: stdout)")

    m = sub.add_parser("metrics", help="volume-weighted statistics of "
                                       "fields in a VTK file")
    m.add_argument("vtk")
    m.add_argument("--field", action="append", default=None,
                   help="restrict to the named field(s)")
    m.add_argument("--output", default=None)
    return p


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def cmd_genfield(args):
    cfg = caseio.parse_case(args.case)
    mesh = caseio.build_mesh(cfg)
    blocks = cfg.get("geostat", {}) or {}
    names = args.field or sorted(blocks)
    if not names:
        raise CaseError(f"{args.case}: no geostat blocks to generate")
    out = {}
    for name in names:
        if name not in blocks:
            raise CaseError(f"no geostat block named {name!r}")
        field = caseio.build_geostat_field(blocks[name], mesh,
                                           seed=args.seed, name=name)
        out[name] = field
    _ensure_dir(args.output_dir)
    path = os.path.join(args.output_dir, "fields.vtk")
    write_vtk(path, mesh, out, title="geofv generated fields")
    print(path)
    return EXIT_OK


class _Writer:
    """Time-interval VTK writer plus a per-step metrics CSV."""

    def __init__(self, outdir, mesh, interval, field_names, metric_names):
        self.outdir = outdir
        self.mesh = mesh
        self.interval = interval
        self.field_names = field_names
        self.metric_names = metric_names
        self.next_write = 0.0
        self.index = 0
        self.rows = []

    def fields_of(self, model):
        mesh = self.mesh
        v = cell_velocity(mesh, model.transport.phi_f, model.transport.phi_b)
        K = np.asarray(model.flow.K, dtype=float)
        if K.ndim == 0:
            K = np.full(mesh.n_cells, float(K))
        elif K.ndim == 2:
            K = K[:, :3].mean(axis=1)     # diagonal average for output
        table = {"c": model.transport.c, "p": model.flow.p, "v": v,
                 "rho": model.flow.rho, "mu": model.flow.mu, "K": K}
        missing = [n for n in self.field_names if n not in table]
        if missing:
            raise CaseError(f"unknown output field(s) {missing}; "
                            f"choose from {sorted(table)}")
        return {n: table[n] for n in self.field_names}

    def maybe_write(self, t, model):
        if self.interval is None or t + 1e-12 < self.next_write:
            return
        path = os.path.join(self.outdir, f"fields_{self.index:05d}.vtk")
        write_vtk(path, self.mesh, self.fields_of(model),
                  title=f"t={t:.9g}")
        self.index += 1
        while self.next_write <= t + 1e-12:
            self.next_write += self.interval

    def record(self, t, dt, model, result):
        row = [t, dt, result.outer, result.change]
        for name in self.metric_names:
            stats = field_metrics(self.fields_of(model)[name], self.mesh)
            row.extend([stats["mean"], stats["variance"],
                        stats["min"], stats["max"]])
        self.rows.append(row)

    def flush(self):
        header = ["t", "dt", "outer", "change"]
        for name in self.metric_names:
            header.extend(f"{name}_{s}" for s in
                          ("mean", "variance", "min", "max"))
        write_csv(os.path.join(self.outdir, "metrics.csv"),
                  header, self.rows)


def _run_dual(cfg, outdir, seed):
    mesh = caseio.build_mesh(cfg)
    dual = caseio.build_dual_porosity(cfg, mesh, seed)
    bcs = caseio.build_bcs(cfg, "flow")
    d = cfg["dual_porosity"]
    fcfg = cfg["flow"]
    pin = fcfg.get("pin")
    if pin is not None:
        pin = (int(pin[0]), float(pin[1]))
    res = solve_dual_porosity(mesh, dual, bcs, bcs,
                              scheme=d.get("scheme", "schur_split"),
                              tol=d.get("tol", 1e-8),
                              max_outer=d.get("max_outer", 2000),
                              pin=pin, formulation=fcfg["formulation"])
    if not res.converged:
        raise CouplingError(f"dual-porosity outer loop did not converge "
                            f"({res.outer} iterations, residual "
                            f"{res.history[-1]:.3e})")
    from .flow import darcy_flux
    phi_m, phib_m = darcy_flux(mesh, dual.matrix, res.p, bcs,
                               formulation=fcfg["formulation"])
    phi_f, phib_f = darcy_flux(mesh, dual.fracture, res.p_hat, bcs,
                               formulation=fcfg["formulation"])
    fields = {"p_matrix": res.p, "p_fracture": res.p_hat,
              "v_matrix": cell_velocity(mesh, phi_m, phib_m),
              "v_fracture": cell_velocity(mesh, phi_f, phib_f)}
    write_vtk(os.path.join(outdir, "fields_00000.vtk"), mesh, fields,
              title="dual porosity steady state")
    write_csv(os.path.join(outdir, "metrics.csv"),
              ["outer", "residual"],
              [[i + 1, r] for i, r in enumerate(res.history)])
    print(f"dual porosity converged in {res.outer} outer iterations")
    return EXIT_OK


def cmd_run(args):
    cfg = caseio.parse_case(args.case)
    if args.t_end is not None:
        cfg.data.setdefault("time", {})["t_end"] = args.t_end
    if args.write_interval is not None:
        cfg.data.setdefault("output", {})["write_interval"] = \
            args.write_interval
    outdir = _ensure_dir(args.output_dir)
    if cfg.get("dual_porosity") is not None:
        return _run_dual(cfg, outdir, args.seed)

    model = caseio.build_model(cfg, seed=args.seed)
    tc = caseio.build_time_controls(cfg)
    pc = caseio.build_picard(cfg)
    ocfg = cfg["output"]
    writer = _Writer(outdir, model.mesh, ocfg.get("write_interval"),
                     ocfg["fields"], ocfg["metrics"])
    writer.maybe_write(0.0, model)

    def observe(t, dt, m, result):
        writer.record(t, dt, m, result)
        writer.maybe_write(t, m)

    n = run_coupled(model, tc, pc, observers=[observe])
    if writer.interval is not None:
        # guarantee a final snapshot
        path = os.path.join(outdir, f"fields_{writer.index:05d}.vtk")
        write_vtk(path, model.mesh, writer.fields_of(model),
                  title=f"t={tc.t_end:.9g}")
    writer.flush()
    print(f"completed {n} steps to t={tc.t_end:.9g}")
    return EXIT_OK


def cmd_pdf(args):
    _, _, _, fields = read_vtk(args.vtk)
    if args.field not in fields:
        raise CaseError(f"{args.vtk} has no field {args.field!r}; "
                        f"available: {sorted(fields)}")
    v = fields[args.field]
    if v.ndim != 1:
        raise CaseError(f"{args.field!r} is not a scalar field")
    density, edges = spatial_pdf(v, args.bins, args.spacing)
    rows = [[edges[i], edges[i + 1], density[i]]
            for i in range(len(density))]
    if args.output:
        write_csv(args.output, ["bin_lo", "bin_hi", "density"], rows)
        print(args.output)
    else:
        print("bin_lo,bin_hi,density")
        for row in rows:
            print(",".join("%.9g" % v for v in row))
    return EXIT_OK


def cmd_metrics(args):
    dims, origin, spacing, fields = read_vtk(args.vtk)
    nx, ny, nz = (max(d - 1, 1) for d in dims)

    class _M:
        n_cells = nx * ny * nz
        cell_volume = float(np.prod(spacing))
    names = args.field or sorted(fields)
    rows = []
    for name in names:
        if name not in fields:
            raise CaseError(f"{args.vtk} has no field {name!r}")
        v = fields[name]
        if v.ndim != 1:
            v = np.linalg.norm(v, axis=1)
        stats = field_metrics(v, _M)
        rows.append([name, stats["mean"], stats["variance"], stats["min"],
                     stats["max"], stats["integral"]])
    header = ["field", "mean", "variance", "min", "max", "integral"]
    if args.output:
        write_csv(args.output, header, rows)
        print(args.output)
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(row[:1] + ["%.9g" % v for v in row[1:]]))
    return EXIT_OK


_COMMANDS = {"genfield": cmd_genfield, "run": cmd_run, "pdf": cmd_pdf,
             "metrics": cmd_metrics}


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except _NUMERIC_ERRORS as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except _CONFIG_ERRORS as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
