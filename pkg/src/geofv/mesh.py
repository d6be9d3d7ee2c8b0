"""Cartesian finite-volume meshes and cell/face fields.

Cells are numbered lexicographically with x fastest:
``idx = i + nx * (j + ny * k)``.  Internal faces are grouped by axis
(x-faces first, then y, then z) and ordered by owner index within each
group, so all derived quantities are bit-reproducible.  2-D problems use
``nz=1``; the z patches then carry no flux.
"""

import numpy as np

PATCH_NAMES = ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")


class MeshError(ValueError):
    pass


class Patch:
    """A named group of boundary faces on one side of the box."""

    def __init__(self, name, axis, sign, cells, area, d_half, centers):
        self.name = name
        self.axis = axis          # 0, 1, 2
        self.sign = sign          # -1 for min side, +1 for max side
        self.cells = cells        # adjacent cell index per face
        self.area = area          # face area per face
        self.d_half = d_half      # cell-center to face-center distance
        self.centers = centers    # face centers, (n_faces, 3)

    @property
    def n_faces(self):
        return len(self.cells)

    def normal(self):
        n = np.zeros(3)
        n[self.axis] = self.sign
        return n


class Mesh:
    """Uniform Cartesian grid with owner/neighbour face connectivity."""

    def __init__(self, nx, ny, nz, lengths, origin=(0.0, 0.0, 0.0)):
        n = (int(nx), int(ny), int(nz))
        lengths = np.asarray(lengths, dtype=float)
        if any(c < 1 for c in n):
            raise MeshError(f"cell counts must be >= 1, got {n}")
        if lengths.shape != (3,) or np.any(lengths <= 0.0):
            raise MeshError(f"lengths must be 3 positive values, got {lengths}")
        self.nx, self.ny, self.nz = n
        self.n = n
        self.lengths = lengths
        self.origin = np.asarray(origin, dtype=float)
        self.spacing = lengths / np.array(n, dtype=float)
        self.n_cells = self.nx * self.ny * self.nz
        self.cell_volume = float(np.prod(self.spacing))

        self.cell_centers = self._build_centers()
        (self.f_owner, self.f_neigh, self.f_axis,
         self.f_area, self.f_dist, self.f_centers) = self._build_internal_faces()
        self.n_faces = len(self.f_owner)
        self.patches = self._build_patches()
        self._csr_cache = None

    # -- construction ----------------------------------------------------

    def _build_centers(self):
        ax = [self.origin[d] + (np.arange(self.n[d]) + 0.5) * self.spacing[d]
              for d in range(3)]
        X, Y, Z = np.meshgrid(ax[0], ax[1], ax[2], indexing="ij")
        # x fastest: transpose to (k, j, i) then ravel
        pts = np.stack([X, Y, Z], axis=-1)           # (nx, ny, nz, 3)
        return pts.transpose(2, 1, 0, 3).reshape(-1, 3)

    def cell_index(self, i, j, k=0):
        return i + self.nx * (j + self.ny * k)

    def _face_area(self, axis):
        other = [d for d in range(3) if d != axis]
        return self.spacing[other[0]] * self.spacing[other[1]]

    def _build_internal_faces(self):
        owner, neigh, axes = [], [], []
        nx, ny, nz = self.n
        idx = np.arange(self.n_cells).reshape(nz, ny, nx)
        for axis in range(3):
            if self.n[axis] < 2:
                continue
            if axis == 0:
                o, nb = idx[:, :, :-1], idx[:, :, 1:]
            elif axis == 1:
                o, nb = idx[:, :-1, :], idx[:, 1:, :]
            else:
                o, nb = idx[:-1, :, :], idx[1:, :, :]
            o = np.sort(o.ravel())
            nb = o + (1 if axis == 0 else (nx if axis == 1 else nx * ny))
            owner.append(o)
            neigh.append(nb)
            axes.append(np.full(len(o), axis, dtype=np.int64))
        if owner:
            owner = np.concatenate(owner)
            neigh = np.concatenate(neigh)
            axes = np.concatenate(axes)
        else:
            owner = np.zeros(0, dtype=np.int64)
            neigh = np.zeros(0, dtype=np.int64)
            axes = np.zeros(0, dtype=np.int64)
        area = np.array([self._face_area(a) for a in range(3)])[axes] \
            if len(axes) else np.zeros(0)
        dist = self.spacing[axes] if len(axes) else np.zeros(0)
        centers = 0.5 * (self.cell_centers[owner] + self.cell_centers[neigh]) \
            if len(axes) else np.zeros((0, 3))
        return owner, neigh, axes, area, dist, centers

    def _build_patches(self):
        nx, ny, nz = self.n
        idx = np.arange(self.n_cells).reshape(nz, ny, nx)
        sel = {
            "xmin": (0, -1, idx[:, :, 0]), "xmax": (0, +1, idx[:, :, -1]),
            "ymin": (1, -1, idx[:, 0, :]), "ymax": (1, +1, idx[:, -1, :]),
            "zmin": (2, -1, idx[0, :, :]), "zmax": (2, +1, idx[-1, :, :]),
        }
        patches = {}
        for name, (axis, sign, cells) in sel.items():
            cells = np.sort(cells.ravel())
            area = np.full(len(cells), self._face_area(axis))
            d_half = np.full(len(cells), 0.5 * self.spacing[axis])
            centers = self.cell_centers[cells].copy()
            centers[:, axis] += sign * 0.5 * self.spacing[axis]
            patches[name] = Patch(name, axis, sign, cells, area, d_half, centers)
        return patches

    # -- helpers ---------------------------------------------------------

    def shaped(self, values):
        """Reshape a flat cell array to (nx, ny, nz) with ij indexing."""
        return np.asarray(values).reshape(self.nz, self.ny, self.nx).transpose(2, 1, 0)

    def __repr__(self):
        return (f"Mesh({self.nx}x{self.ny}x{self.nz}, "
                f"lengths={tuple(self.lengths)})")


def build_cartesian(nx, ny, nz, lengths, origin=(0.0, 0.0, 0.0)):
    """Build a Cartesian mesh; 2-D problems use nz=1."""
    return Mesh(nx, ny, nz, lengths, origin)


_RANK_SHAPE = {"scalar": (), "vector": (3,), "symm_tensor": (6,)}

# symmetric tensor component order
TENSOR_COMPONENTS = ("xx", "yy", "zz", "xy", "xz", "yz")


class Field:
    """Cell-centered data bound to a mesh.

    Rank is one of ``scalar`` (n,), ``vector`` (n, 3) or ``symm_tensor``
    (n, 6) with components ordered xx, yy, zz, xy, xz, yz.
    """

    def __init__(self, mesh, values, rank="scalar", name=""):
        if rank not in _RANK_SHAPE:
            raise MeshError(f"unknown field rank {rank!r}")
        values = np.asarray(values, dtype=float)
        expect = (mesh.n_cells,) + _RANK_SHAPE[rank]
        if values.shape == _RANK_SHAPE[rank]:  # broadcast a uniform value
            values = np.broadcast_to(values, expect).copy()
        if values.shape != expect:
            raise MeshError(f"field shape {values.shape} does not match "
                            f"{expect} for rank {rank!r}")
        self.mesh = mesh
        self.values = values
        self.rank = rank
        self.name = name

    @classmethod
    def uniform(cls, mesh, value, rank="scalar", name=""):
        if rank == "scalar":
            return cls(mesh, np.full(mesh.n_cells, float(value)), rank, name)
        return cls(mesh, np.asarray(value, dtype=float), rank, name)

    def tensor_matrix(self, cell):
        """Reconstruct the full symmetric 3x3 matrix for one cell."""
        if self.rank != "symm_tensor":
            raise MeshError("tensor_matrix requires a symm_tensor field")
        xx, yy, zz, xy, xz, yz = self.values[cell]
        return np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])

    def copy(self):
        return Field(self.mesh, self.values.copy(), self.rank, self.name)


def normal_permeability(K, axis, n_cells):
    """Diagonal tensor component seen by faces normal to ``axis``.

    ``K`` may be a scalar, (n,) isotropic, (n,3) diagonal, or (n,6)
    symmetric array (off-diagonal coupling is ignored by TPFA).
    """
    K = np.asarray(K, dtype=float)
    if K.ndim == 0:
        return np.full(n_cells, float(K))
    if K.ndim == 1:
        return K
    return K[:, axis]


def face_transmissibility(mesh, K):
    """TPFA transmissibilities: harmonic across the two half-cells.

    Returns ``(T_internal, T_boundary)`` where the boundary part maps
    patch name to the one-sided coefficients A * K_n / d_half.
    """
    Kv = K.values if isinstance(K, Field) else np.asarray(K, dtype=float)
    _check_positive_normal(Kv, mesh.n_cells)
    T = np.zeros(mesh.n_faces)
    for axis in range(3):
        sel = mesh.f_axis == axis
        if not np.any(sel):
            continue
        kn = normal_permeability(Kv, axis, mesh.n_cells)
        o, nb = mesh.f_owner[sel], mesh.f_neigh[sel]
        dh = 0.5 * mesh.f_dist[sel]
        T[sel] = mesh.f_area[sel] / (dh / kn[o] + dh / kn[nb])
    Tb = {}
    for name, patch in mesh.patches.items():
        kn = normal_permeability(Kv, patch.axis, mesh.n_cells)[patch.cells]
        Tb[name] = patch.area * kn / patch.d_half
    return T, Tb


def _check_positive_normal(K, n_cells):
    K = np.asarray(K, dtype=float)
    diag = K if K.ndim <= 1 else K[:, :3] if K.shape[1] >= 3 else K
    bad = np.atleast_1d(diag <= 0.0)
    if np.any(bad):
        cells = np.unique(np.argwhere(np.atleast_2d(bad))[:, -2]
                          if K.ndim > 1 else np.argwhere(bad)[:, 0])
        raise MeshError(f"non-positive normal permeability in cells "
                        f"{cells[:10].tolist()}")
