"""geofv: structured-grid finite-volume flow, transport and geostatistics.

Submodules:

- :mod:`geofv.mesh` — Cartesian meshes, fields, transmissibilities
- :mod:`geofv.geostat` — spectral Gaussian random fields and truncation
- :mod:`geofv.constitutive` — fluid property laws and dispersion tensors
- :mod:`geofv.linsolve` — sparse storage, PCG/BiCGStab
- :mod:`geofv.flow` — Darcy pressure, boundary conditions, dual porosity
- :mod:`geofv.transport` — implicit advection-dispersion
- :mod:`geofv.coupling` — Picard flow-transport coupling and diagnostics
- :mod:`geofv.caseio` / :mod:`geofv.vtkio` / :mod:`geofv.postproc` /
  :mod:`geofv.cli` — case files, serialization, statistics, CLI
"""

from ._kernels import BACKEND
from .mesh import Field, Mesh, MeshError, build_cartesian

__version__ = "1.0.0"

__all__ = ["BACKEND", "Field", "Mesh", "MeshError", "build_cartesian",
           "__version__"]
