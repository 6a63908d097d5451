"""Backward-Euler TPFA scheme: edge mobilities, fluxes, residual, Jacobian.

States are arrays of shape ``(n_species, n_cells)``.  The nonlinear system
is ordered cell by cell with the species of one cell contiguous, i.e. the
unknown ``u[i, K]`` sits at position ``K * n_species + i``.

The flux across ``sigma = K|L`` (owner ``K``) is::

    F_i = -tau * (a* D u_i + sum_j (a_ij^lam - a*) (u_j,s D u_i - u_i,s D u_j))

with ``a_ij^lam = lam * a_ij + (1 - lam) * a*`` and ``u_j,s`` the
logarithmic mean of the two cell values, normalized by ``max(1, sum_j u_j,s)``
when ``safeguard`` is on.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._backend import kernels
from .mesh import Mesh, face_jumps


@dataclass(frozen=True, eq=False)
class CrossDiffusionMatrix:
    """Symmetric nonnegative cross-diffusion coefficients and the a* shift.

    The diagonal of ``coefficients`` is never used by the scheme.
    """

    coefficients: np.ndarray
    astar: float
    check: bool = True

    def __post_init__(self):
        a = np.array(self.coefficients, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
            raise ValueError("cross-diffusion matrix must be square with N >= 2")
        a.setflags(write=False)
        object.__setattr__(self, "coefficients", a)
        object.__setattr__(self, "astar", float(self.astar))
        if not np.all(np.isfinite(a)):
            raise ValueError("cross-diffusion coefficients must be finite")
        if not np.array_equal(a, a.T):
            raise ValueError("cross-diffusion matrix must be symmetric")
        if np.any(a < 0):
            raise ValueError("cross-diffusion coefficients must be nonnegative")
        if np.any(np.diag(a) != 0):
            warnings.warn("diagonal cross-diffusion coefficients are ignored",
                          stacklevel=3)
        if self.check:
            if not self.astar > 0:
                raise ValueError("a* must be positive")
            if self.astar < self.min_offdiag:
                # entropy decay still holds (every a_ij - a* >= 0) but a* lies
                # outside the recommended [min a_ij, max a_ij]
                warnings.warn(f"a* = {self.astar} is below min a_ij = {self.min_offdiag}",
                              stacklevel=3)

    @property
    def n_species(self) -> int:
        return self.coefficients.shape[0]

    def _offdiag(self):
        return self.coefficients[~np.eye(self.n_species, dtype=bool)]

    @property
    def min_offdiag(self) -> float:
        return float(self._offdiag().min())

    @property
    def max_offdiag(self) -> float:
        return float(self._offdiag().max())

    @property
    def nondegenerate(self) -> bool:
        return self.min_offdiag > 0

    def with_astar(self, astar: float, check: bool = True) -> "CrossDiffusionMatrix":
        return CrossDiffusionMatrix(self.coefficients, astar, check=check)

    def cross_weights(self, lam: float = 1.0) -> np.ndarray:
        """``lam * (a_ij - a*)`` off the diagonal, zero on it."""
        b = lam * (self.coefficients - self.astar)
        np.fill_diagonal(b, 0.0)
        return b


def log_mean(a, b):
    """Logarithmic mean extended by 0 when ``min(a, b) <= 0``.

    >>> float(log_mean(1.0, np.e))
    1.718281828459045
    """
    return kernels.log_mean(a, b)


def log_mean_grad(a, b):
    """``d log_mean(a, b) / da`` (1/2 at ``a == b``, 0 on the flat branch)."""
    return kernels.log_mean_grad(a, b)


def _face_states(U, mesh):
    own, nb, tau = mesh.interior_faces()
    uK = np.ascontiguousarray(U[:, own].T)
    uL = np.ascontiguousarray(U[:, nb].T)
    return uK, uL, tau, own, nb


def edge_concentrations(U, mesh: Mesh, safeguarded: bool = False) -> np.ndarray:
    """Edge values ``u_{i,sigma}`` on every face, shape ``(n_species, n_faces)``.

    Boundary faces get the log-mean of the cell value with itself, i.e. the
    cell value; it never enters a flux since boundary jumps vanish.
    """
    U = np.asarray(U, dtype=float)
    out = np.empty((U.shape[0], mesh.n_faces))
    nbmask = mesh.interior
    uK, uL, *_ = _face_states(U, mesh)
    out[:, nbmask] = kernels.edge_values(uK, uL, safeguarded).T
    ext = ~nbmask
    own_ext = U[:, mesh.face_owner[ext]]
    ue = np.where(own_ext > 0, own_ext, 0.0)
    if safeguarded:
        ue = ue / np.maximum(1.0, ue.sum(axis=0))
    out[:, ext] = ue
    return out


def fluxes(U, matrix: CrossDiffusionMatrix, mesh: Mesh, lam: float = 1.0,
           safeguarded: bool = True, edge=None) -> np.ndarray:
    """Owner-oriented fluxes on every face, shape ``(n_species, n_faces)``.

    Boundary fluxes are exactly zero.  ``edge`` may supply precomputed
    ``(n_species, n_faces)`` edge values instead of the log-mean ones.
    """
    U = np.asarray(U, dtype=float)
    B = matrix.cross_weights(lam)
    out = np.zeros((U.shape[0], mesh.n_faces))
    nbmask = mesh.interior
    if edge is None:
        uK, uL, tau, *_ = _face_states(U, mesh)
        out[:, nbmask] = kernels.face_fluxes(uK, uL, tau, B, matrix.astar, safeguarded).T
    else:
        du = face_jumps(U, mesh)[:, nbmask]
        ue = np.asarray(edge)[:, nbmask]
        tau = mesh.transmissibilities[nbmask]
        out[:, nbmask] = -tau * ((matrix.astar + B @ ue) * du - ue * (B @ du))
    return out


def divergence(face_values, mesh: Mesh) -> np.ndarray:
    """Sum over ``sigma in E_K`` of owner-oriented face quantities, per cell."""
    face_values = np.atleast_2d(face_values)
    out = np.zeros((face_values.shape[0], mesh.n_cells))
    nb = mesh.interior
    for i in range(face_values.shape[0]):
        out[i] = np.bincount(mesh.face_owner[nb], face_values[i, nb], mesh.n_cells)
        out[i] -= np.bincount(mesh.face_neighbor[nb], face_values[i, nb], mesh.n_cells)
    return out


def residual(U_new, U_old, dt: float, matrix: CrossDiffusionMatrix, mesh: Mesh,
             lam: float = 1.0, mu: float = 0.0, reaction=None,
             safeguarded: bool = True) -> np.ndarray:
    """Scheme residual per (species, cell).

    ``m_K (u_new - u_old) / dt + sum_sigma F_{i,K sigma} - mu m_K r_i(U_K)``.
    """
    U_new = np.asarray(U_new, dtype=float)
    U_old = np.asarray(U_old, dtype=float)
    if U_new.shape != U_old.shape or U_new.shape != (matrix.n_species, mesh.n_cells):
        raise ValueError(f"state shape {U_new.shape} / {U_old.shape} does not match "
                         f"({matrix.n_species}, {mesh.n_cells})")
    if not dt > 0:
        raise ValueError("dt must be positive")
    m = mesh.cell_measures
    res = m * (U_new - U_old) / dt
    res += divergence(fluxes(U_new, matrix, mesh, lam, safeguarded), mesh)
    if reaction is not None and mu != 0.0:
        res -= mu * m * reaction.rates(U_new)
    return res


class JacobianLayout:
    """Fixed sparsity pattern of the scheme Jacobian.

    Block entries produced by the kernels are scattered into either LAPACK
    banded storage (narrow bandwidth, e.g. 1D meshes) or CSC storage through
    precomputed slot maps, so each Newton iteration is one ``bincount``.
    """

    def __init__(self, mesh: Mesh, n_species: int, banded=None):
        n = n_species
        self.mesh = mesh
        self.n_species = n
        self.size = n * mesh.n_cells
        own, nb, _ = mesh.interior_faces()
        ii, mm = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        ii, mm = ii.ravel(), mm.ravel()

        def block(rc, cc):
            return ((rc[:, None] * n + ii).ravel(), (cc[:, None] * n + mm).ravel())

        cells = np.arange(mesh.n_cells)
        parts = [block(cells, cells), block(own, own), block(own, nb),
                 block(nb, own), block(nb, nb)]
        rows = np.concatenate([p[0] for p in parts])
        cols = np.concatenate([p[1] for p in parts])
        self.rows, self.cols = rows, cols
        self.n_cell_entries = cells.size * n * n
        self.bandwidth = int(np.max(np.abs(rows - cols))) if rows.size else 0
        if banded is None:
            banded = self.bandwidth <= 4 * n
        self.banded = bool(banded)
        if self.banded:
            bw = self.bandwidth
            self._slot = (bw + rows - cols) * self.size + cols
            self._nslots = (2 * bw + 1) * self.size
        else:
            key = cols.astype(np.int64) * self.size + rows
            uniq, inv = np.unique(key, return_inverse=True)
            self._slot = inv
            self._nslots = uniq.size
            self._indices = (uniq % self.size).astype(np.int32)
            counts = np.bincount(uniq // self.size, minlength=self.size)
            self._indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)

    def values(self, cell_blocks, dK, dL):
        """Concatenate block entries in pattern order."""
        return np.concatenate([cell_blocks.ravel(), dK.ravel(), dL.ravel(),
                               (-dK).ravel(), (-dL).ravel()])

    def storage(self, values):
        return np.bincount(self._slot, weights=values, minlength=self._nslots)

    def to_csc(self, values) -> sp.csc_matrix:
        return sp.csc_matrix((values, (self.rows, self.cols)),
                             shape=(self.size, self.size))

    def solve(self, values, rhs):
        """Solve ``J x = rhs`` with the entries ``values``."""
        data = self.storage(values)
        if self.banded:
            bw = self.bandwidth
            ab = data.reshape(2 * bw + 1, self.size)
            return scipy.linalg.solve_banded((bw, bw), ab, rhs, check_finite=True)
        mat = sp.csc_matrix((data, self._indices, self._indptr),
                            shape=(self.size, self.size))
        return spla.splu(mat).solve(rhs)


def flatten(U) -> np.ndarray:
    """``(n_species, n_cells)`` -> unknown vector in cell-major order."""
    return np.ascontiguousarray(np.asarray(U).T).ravel()


def unflatten(x, n_species: int) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x).reshape(-1, n_species).T)


def assemble(U_new, U_old, dt, matrix: CrossDiffusionMatrix, mesh: Mesh, layout,
             lam=1.0, mu=0.0, reaction=None, safeguarded=True):
    """Residual vector and Jacobian entries (in ``layout`` order) in one sweep."""
    U_new = np.asarray(U_new, dtype=float)
    n = matrix.n_species
    m = mesh.cell_measures
    B = matrix.cross_weights(lam)
    uK, uL, tau, own, nb = _face_states(U_new, mesh)
    flux, dK, dL = kernels.face_blocks(uK, uL, tau, B, matrix.astar, safeguarded)

    res = m * (U_new - U_old) / dt
    for i in range(n):
        res[i] += np.bincount(own, flux[:, i], mesh.n_cells)
        res[i] -= np.bincount(nb, flux[:, i], mesh.n_cells)
    cell_blocks = np.zeros((mesh.n_cells, n, n))
    idx = np.arange(n)
    cell_blocks[:, idx, idx] = (m / dt)[:, None]
    if reaction is not None and mu != 0.0:
        res -= mu * m * reaction.rates(U_new)
        cell_blocks -= mu * m[:, None, None] * reaction.jacobian(U_new)
    return flatten(res), layout.values(cell_blocks, dK, dL)


def jacobian(U_new, U_old, dt, matrix: CrossDiffusionMatrix, mesh: Mesh,
             lam=1.0, mu=0.0, reaction=None, safeguarded=True) -> sp.csc_matrix:
    """Exact derivative of :func:`residual` w.r.t. ``U_new`` (cell-major order)."""
    layout = JacobianLayout(mesh, matrix.n_species, banded=False)
    _, vals = assemble(U_new, U_old, dt, matrix, mesh, layout, lam, mu, reaction,
                       safeguarded)
    return layout.to_csc(vals)
