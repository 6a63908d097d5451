"""Admissible two-point-flux meshes and time grids.

Only uniform intervals and Cartesian rectangles are built here, but
:class:`Mesh` itself is a plain face list with transmissibilities, so any
orthogonal (admissible) mesh can be fed to the rest of the package.

Faces carry a fixed orientation ``owner -> neighbor``; exterior faces have
``neighbor == -1``.  Cells of a 2D grid are numbered with x running fastest.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen(a, dtype=float):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Admissible TPFA mesh.

    Attributes
    ----------
    dimension : int
        Space dimension (1 or 2).
    cell_centers : ndarray, shape (n_cells, dimension)
    cell_measures : ndarray, shape (n_cells,)
    face_owner, face_neighbor : ndarray of int, shape (n_faces,)
        ``face_neighbor`` is -1 on boundary faces.
    face_measures : ndarray
        (d-1)-dimensional measure, 1 in 1D.
    face_distances : ndarray
        ``|x_K - x_L|`` on interior faces, ``|x_K - x_sigma|`` on the boundary.
    face_normals : ndarray, shape (n_faces, dimension)
        Unit normal pointing out of the owner cell.
    face_centers : ndarray, shape (n_faces, dimension)
    shape : tuple of int
        Cell counts per direction, used for nested-grid transfers.
    bounds : tuple of (lo, hi) pairs
    """

    dimension: int
    cell_centers: np.ndarray
    cell_measures: np.ndarray
    face_owner: np.ndarray
    face_neighbor: np.ndarray
    face_measures: np.ndarray
    face_distances: np.ndarray
    face_normals: np.ndarray
    face_centers: np.ndarray
    shape: tuple
    bounds: tuple
    cell_diameters: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("cell_centers", "cell_measures", "face_measures",
                     "face_distances", "face_normals", "face_centers",
                     "cell_diameters"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        for name in ("face_owner", "face_neighbor"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.intp))
        if np.any(self.face_distances <= 0) or np.any(self.face_measures <= 0):
            raise ValueError("face measures and distances must be positive")
        interior = self.face_neighbor >= 0
        object.__setattr__(self, "_interior", _frozen(interior, bool))

    @property
    def n_cells(self) -> int:
        return self.cell_measures.shape[0]

    @property
    def n_faces(self) -> int:
        return self.face_owner.shape[0]

    @property
    def interior(self) -> np.ndarray:
        """Boolean mask of interior faces."""
        return self._interior

    @property
    def transmissibilities(self) -> np.ndarray:
        return self.face_measures / self.face_distances

    @property
    def measure(self) -> float:
        return float(np.sum(self.cell_measures))

    @property
    def size(self) -> float:
        """Mesh size h_T, the largest cell diameter."""
        return float(np.max(self.cell_diameters))

    @property
    def diamond_measures(self) -> np.ndarray:
        """Measure of the diamond cell around each face.

        Interior faces: ``m_sigma * d_sigma / d``.  Boundary faces only carry
        the half-diamond on the owner side, whose height is ``d_sigma`` too.
        """
        return self.face_measures * self.face_distances / self.dimension

    @property
    def regularity(self) -> float:
        """min over (K, sigma in E_K) of dist(x_K, sigma) / d_sigma."""
        own = self.owner_distances
        ratios = [own / self.face_distances]
        nb = self.interior
        ratios.append(self.neighbor_distances[nb] / self.face_distances[nb])
        return float(min(r.min() for r in ratios))

    @property
    def owner_distances(self) -> np.ndarray:
        """Orthogonal distance from the owner center to the face plane."""
        diff = self.face_centers - self.cell_centers[self.face_owner]
        return np.abs(np.einsum("fd,fd->f", diff, self.face_normals))

    @property
    def neighbor_distances(self) -> np.ndarray:
        out = np.zeros(self.n_faces)
        nb = self.interior
        diff = self.face_centers[nb] - self.cell_centers[self.face_neighbor[nb]]
        out[nb] = np.abs(np.einsum("fd,fd->f", diff, self.face_normals[nb]))
        return out

    def interior_faces(self):
        """Return ``(owner, neighbor, transmissibility)`` over interior faces."""
        nb = self.interior
        return (self.face_owner[nb], self.face_neighbor[nb],
                self.transmissibilities[nb])

    def cell_faces(self, cell: int) -> np.ndarray:
        """Indices of the faces of ``cell``."""
        return np.flatnonzero((self.face_owner == cell) | (self.face_neighbor == cell))

    def is_orthogonal(self, tol: float = 1e-12) -> bool:
        """Check that x_L - x_K is parallel to the face normal on interior faces."""
        nb = self.interior
        seg = (self.cell_centers[self.face_neighbor[nb]]
               - self.cell_centers[self.face_owner[nb]])
        n = self.face_normals[nb]
        along = np.einsum("fd,fd->f", seg, n)
        residue = seg - along[:, None] * n
        return bool(np.all(np.linalg.norm(residue, axis=1) <= tol * self.size)
                    and np.all(along > 0))


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing times ``0 = t_0 < ... < t_N = T``."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("a time grid needs at least two instants")
        if t[0] != 0.0:
            raise ValueError("time grids start at t = 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", _frozen(t))

    @classmethod
    def uniform(cls, final_time: float, dt: float) -> "TimeGrid":
        n = int(round(final_time / dt))
        if n < 1 or not np.isclose(n * dt, final_time, rtol=1e-12, atol=0.0):
            raise ValueError(f"dt={dt} does not divide T={final_time}")
        return cls(np.arange(n + 1) * dt)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def max_step(self) -> float:
        return float(self.steps.max())


def build_uniform_1d(domain, cell_count: int) -> Mesh:
    """Uniform partition of ``[a, b]`` with midpoints as cell centers."""
    a, b = map(float, domain)
    if not b > a:
        raise ValueError(f"degenerate interval [{a}, {b}]")
    if int(cell_count) != cell_count or cell_count < 2:
        raise ValueError("cell_count must be an integer >= 2")
    n = int(cell_count)
    h = (b - a) / n
    nodes = a + h * np.arange(n + 1)
    nodes[-1] = b
    centers = 0.5 * (nodes[:-1] + nodes[1:])
    measures = np.diff(nodes)

    owner = np.concatenate([np.arange(n - 1), [0, n - 1]])
    neighbor = np.concatenate([np.arange(1, n), [-1, -1]])
    fcenters = np.concatenate([nodes[1:-1], [a, b]])
    normals = np.concatenate([np.ones(n - 1), [-1.0, 1.0]])
    dist = np.empty(n + 1)
    dist[: n - 1] = np.diff(centers)
    dist[n - 1] = centers[0] - a
    dist[n] = b - centers[-1]
    return Mesh(
        dimension=1,
        cell_centers=centers[:, None],
        cell_measures=measures,
        face_owner=owner,
        face_neighbor=neighbor,
        face_measures=np.ones(n + 1),
        face_distances=dist,
        face_normals=normals[:, None],
        face_centers=fcenters[:, None],
        shape=(n,),
        bounds=((a, b),),
        cell_diameters=measures,
    )


def build_cartesian_2d(domain, nx: int, ny: int) -> Mesh:
    """Cartesian grid of ``(x0, x1) x (y0, y1)`` with centroid cell centers."""
    (x0, x1), (y0, y1) = [tuple(map(float, d)) for d in domain]
    if not (x1 > x0 and y1 > y0):
        raise ValueError("rectangle extents must be positive")
    if nx < 2 or ny < 2 or int(nx) != nx or int(ny) != ny:
        raise ValueError("nx and ny must be integers >= 2")
    nx, ny = int(nx), int(ny)
    dx, dy = (x1 - x0) / nx, (y1 - y0) / ny
    xc = x0 + dx * (np.arange(nx) + 0.5)
    yc = y0 + dy * (np.arange(ny) + 0.5)
    X, Y = np.meshgrid(xc, yc)  # shape (ny, nx): x fastest after ravel
    centers = np.column_stack([X.ravel(), Y.ravel()])
    n_cells = nx * ny

    def cid(i, j):
        return j * nx + i

    owner, neighbor, meas, dist, normal, fc = [], [], [], [], [], []
    ii, jj = np.meshgrid(np.arange(nx - 1), np.arange(ny), indexing="xy")
    ii, jj = ii.ravel(), jj.ravel()
    owner.append(cid(ii, jj)); neighbor.append(cid(ii + 1, jj))
    meas.append(np.full(ii.size, dy)); dist.append(np.full(ii.size, dx))
    normal.append(np.tile([1.0, 0.0], (ii.size, 1)))
    fc.append(np.column_stack([x0 + dx * (ii + 1), yc[jj]]))

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny - 1), indexing="xy")
    ii, jj = ii.ravel(), jj.ravel()
    owner.append(cid(ii, jj)); neighbor.append(cid(ii, jj + 1))
    meas.append(np.full(ii.size, dx)); dist.append(np.full(ii.size, dy))
    normal.append(np.tile([0.0, 1.0], (ii.size, 1)))
    fc.append(np.column_stack([xc[ii], y0 + dy * (jj + 1)]))

    # boundary: west, east, south, north
    j = np.arange(ny)
    i = np.arange(nx)
    for cells, n_vec, m, d, centers_b in (
        (cid(0, j), (-1.0, 0.0), dy, dx / 2, np.column_stack([np.full(ny, x0), yc])),
        (cid(nx - 1, j), (1.0, 0.0), dy, dx / 2, np.column_stack([np.full(ny, x1), yc])),
        (cid(i, 0), (0.0, -1.0), dx, dy / 2, np.column_stack([xc, np.full(nx, y0)])),
        (cid(i, ny - 1), (0.0, 1.0), dx, dy / 2, np.column_stack([xc, np.full(nx, y1)])),
    ):
        owner.append(cells); neighbor.append(np.full(cells.size, -1))
        meas.append(np.full(cells.size, m)); dist.append(np.full(cells.size, d))
        normal.append(np.tile(n_vec, (cells.size, 1)))
        fc.append(centers_b)

    return Mesh(
        dimension=2,
        cell_centers=centers,
        cell_measures=np.full(n_cells, dx * dy),
        face_owner=np.concatenate(owner),
        face_neighbor=np.concatenate(neighbor),
        face_measures=np.concatenate(meas),
        face_distances=np.concatenate(dist),
        face_normals=np.concatenate(normal),
        face_centers=np.concatenate(fc),
        shape=(nx, ny),
        bounds=((x0, x1), (y0, y1)),
        cell_diameters=np.full(n_cells, np.hypot(dx, dy)),
    )


def _check_adjacent(mesh: Mesh, cell: int, face: int):
    if mesh.face_owner[face] != cell and mesh.face_neighbor[face] != cell:
        raise ValueError(f"face {face} is not a face of cell {cell}")


def mirror_value(values, mesh: Mesh, cell: int, face: int):
    """Value of ``values`` across ``face`` seen from ``cell``.

    The neighbour's value on interior faces and the cell's own value on the
    boundary, which makes every boundary jump vanish (no-flux condition).
    """
    _check_adjacent(mesh, cell, face)
    values = np.asarray(values)
    own, nb = mesh.face_owner[face], mesh.face_neighbor[face]
    if nb < 0:
        return values[..., cell]
    return values[..., nb if own == cell else own]


def jump(values, mesh: Mesh, cell: int, face: int):
    """Oriented jump ``D_{K sigma} c = c_{K sigma} - c_K``."""
    values = np.asarray(values)
    return mirror_value(values, mesh, cell, face) - values[..., cell]


def face_jumps(values, mesh: Mesh) -> np.ndarray:
    """Jumps ``c_neighbor - c_owner`` on all faces (zero on the boundary).

    Works on the last axis, so a ``(n_species, n_cells)`` array gives
    ``(n_species, n_faces)``.
    """
    values = np.asarray(values, dtype=float)
    out = np.zeros(values.shape[:-1] + (mesh.n_faces,))
    nb = mesh.interior
    out[..., nb] = (values[..., mesh.face_neighbor[nb]]
                    - values[..., mesh.face_owner[nb]])
    return out
