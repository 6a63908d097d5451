"""Discrete states, initial data, entropy functionals and norms.

A species field is a float array of shape ``(n_species, n_cells)``; edge
fields have shape ``(n_species, n_faces)``.  ``0 ln 0`` is taken as 0.
"""
from __future__ import annotations

import math

import numpy as np

from .mesh import Mesh, face_jumps
from .scheme import log_mean


def total(values, reproducible: bool = False) -> float:
    """Sum of all entries; exactly rounded when ``reproducible``."""
    values = np.asarray(values, dtype=float)
    if reproducible:
        return math.fsum(values.ravel())
    return float(np.sum(values))


# ---------------------------------------------------------------- profiles

class Profile:
    """Initial profile Omega -> simplex, evaluated through exact cell means."""

    n_species: int

    def cell_averages(self, mesh: Mesh) -> np.ndarray:
        raise NotImplementedError


class SampledProfile(Profile):
    """User callable ``f(x) -> (n_species, n_points)``, midpoint quadrature.

    ``x`` is passed with shape ``(dimension, n_points)``.
    """

    def __init__(self, n_species, func):
        self.n_species = n_species
        self.func = func

    def cell_averages(self, mesh):
        vals = np.asarray(self.func(mesh.cell_centers.T), dtype=float)
        return np.broadcast_to(vals, (self.n_species, mesh.n_cells)).copy()


class ConstantProfile(Profile):
    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        self.n_species = self.values.size

    def cell_averages(self, mesh):
        return np.repeat(self.values[:, None], mesh.n_cells, axis=1)


class CosineProfile(Profile):
    """1D profile ``u_i(x) = c_i + a_i cos(k pi (x - x0) / L)`` on [x0, x0+L]."""

    def __init__(self, offsets, amplitudes, wavenumber=1, domain=(0.0, 1.0)):
        self.offsets = np.asarray(offsets, dtype=float)
        self.amplitudes = np.asarray(amplitudes, dtype=float)
        self.n_species = self.offsets.size
        self.wavenumber = wavenumber
        self.domain = tuple(map(float, domain))

    def _omega(self):
        return self.wavenumber * np.pi / (self.domain[1] - self.domain[0])

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        c = np.cos(self._omega() * (x - self.domain[0]))
        return self.offsets[:, None] + self.amplitudes[:, None] * np.atleast_1d(c)[None]

    def cell_averages(self, mesh):
        if mesh.dimension != 1:
            raise ValueError("cosine profiles are one-dimensional")
        w = self._omega()
        x = mesh.cell_centers[:, 0]
        h = mesh.cell_measures
        xl, xr = x - h / 2 - self.domain[0], x + h / 2 - self.domain[0]
        mean_cos = (np.sin(w * xr) - np.sin(w * xl)) / (w * h)
        return self.offsets[:, None] + self.amplitudes[:, None] * mean_cos[None]


class BoxProfile(Profile):
    """Piecewise-constant profile made of indicator functions of boxes.

    ``boxes[i]`` lists the axis-aligned boxes where species ``i`` equals 1;
    a box is ``((lo, hi),)`` in 1D and ``((x0, x1), (y0, y1))`` in 2D.  The
    species ``fill`` (if given) takes the complement ``1 - sum(others)``.
    """

    def __init__(self, boxes, fill=None):
        self.boxes = [list(b) for b in boxes]
        self.n_species = len(self.boxes)
        self.fill = fill

    def cell_averages(self, mesh):
        d = mesh.dimension
        h = np.array([(hi - lo) / n for (lo, hi), n in zip(mesh.bounds, mesh.shape)])
        lo = mesh.cell_centers - h / 2
        hi = mesh.cell_centers + h / 2
        out = np.zeros((self.n_species, mesh.n_cells))
        for i, boxes in enumerate(self.boxes):
            if i == self.fill:
                continue
            for box in boxes:
                box = np.asarray(box, dtype=float).reshape(d, 2)
                overlap = np.ones(mesh.n_cells)
                for k in range(d):
                    overlap *= np.clip(np.minimum(hi[:, k], box[k, 1])
                                       - np.maximum(lo[:, k], box[k, 0]), 0.0, None)
                out[i] += overlap / mesh.cell_measures
        if self.fill is not None:
            out[self.fill] = 1.0 - np.delete(out, self.fill, axis=0).sum(axis=0)
        return out


def project_initial(profile, mesh: Mesh, tol: float = 1e-8) -> np.ndarray:
    """Cell averages of an initial profile, renormalized onto the simplex.

    ``profile`` is a :class:`Profile` or a callable sampled at cell centers.
    Raises if a species is negative beyond ``tol`` or absent from Omega.
    """
    if not isinstance(profile, Profile):
        probe = np.asarray(profile(mesh.cell_centers.T))
        profile = SampledProfile(probe.shape[0], profile)
    u = profile.cell_averages(mesh)
    if np.any(~np.isfinite(u)):
        raise ValueError("initial profile has non-finite values")
    if np.any(u < -tol):
        raise ValueError("initial profile has negative values")
    u = np.maximum(u, 0.0)
    mass = u @ mesh.cell_measures
    if np.any(mass <= 0):
        raise ValueError("every species needs positive total mass")
    s = u.sum(axis=0)
    if np.any(np.abs(s - 1.0) > tol):
        raise ValueError("initial profile does not sum to 1")
    return close_simplex(u / s)


def close_simplex(U) -> np.ndarray:
    """Make each column sum to exactly 1 in floating point.

    The last species is replaced by ``1 - (u_1 + ... + u_{N-1})``, summed in
    index order; adding it back in the same order then rounds to exactly 1.
    Columns where that would make the last entry negative are left alone.
    """
    U = np.array(U, dtype=float)
    head = U[0].copy()
    for i in range(1, U.shape[0] - 1):
        head += U[i]
    last = 1.0 - head
    ok = last >= 0
    U[-1] = np.where(ok, last, U[-1])
    return U


# ---------------------------------------------------------------- functionals

def _xlogx(u):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)


def entropy(U, mesh: Mesh, reproducible: bool = False) -> float:
    """Mixing entropy ``sum_K m_K sum_i u_iK ln u_iK``."""
    U = np.asarray(U, dtype=float)
    if np.any(U < 0):
        raise ValueError("entropy needs a nonnegative field")
    return total(_xlogx(U) * mesh.cell_measures, reproducible)


def relative_entropy(U, reference, mesh: Mesh, reproducible: bool = False) -> float:
    """``sum_i int u_i ln(u_i / ubar_i)`` against a positive constant state."""
    U = np.asarray(U, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if np.any(ref <= 0):
        raise ValueError("reference state must be positive")
    if np.any(U < 0):
        raise ValueError("relative entropy needs a nonnegative field")
    dens = _xlogx(U) - U * np.log(ref)[:, None]
    return total(dens * mesh.cell_measures, reproducible)


def dissipation(U, mesh: Mesh, matrix=None, edge=None, reproducible: bool = False):
    """Fisher-type dissipation ``sum_sigma tau sum_i u_is (D ln u_i)^2``.

    Evaluated as ``tau (D u_i)(D ln u_i)`` (discrete chain rule); faces where
    the edge value vanishes contribute 0.  With ``matrix`` also returns the
    cross dissipation ``sum_sigma tau sum_{i<j} a_ij u_is u_js (D ln u_i - D ln u_j)^2``.
    """
    U = np.asarray(U, dtype=float)
    nb = mesh.interior
    own, ngb = mesh.face_owner[nb], mesh.face_neighbor[nb]
    tau = mesh.transmissibilities[nb]
    uK, uL = U[:, own], U[:, ngb]
    ue = log_mean(uK, uL) if edge is None else np.asarray(edge)[:, nb]
    active = ue > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        dlog = np.where(active, np.log(np.where(active, uL, 1.0))
                        - np.log(np.where(active, uK, 1.0)), 0.0)
    fisher = total(tau * ue * dlog ** 2, reproducible)
    if matrix is None:
        return fisher
    n = U.shape[0]
    cross = np.zeros_like(tau)
    for i in range(n):
        for j in range(i + 1, n):
            a = matrix.coefficients[i, j]
            if a:
                cross += a * ue[i] * ue[j] * (dlog[i] - dlog[j]) ** 2
    return fisher, total(tau * cross, reproducible)


# ---------------------------------------------------------------- reconstructions

def reconstruct_cellwise(values, mesh: Mesh):
    """Piecewise-constant function ``x -> values[..., K(x)]``.

    Only supports the tensor-product meshes built in :mod:`crossdiff.mesh`.
    """
    values = np.asarray(values, dtype=float)

    def sample(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        idx = np.zeros(x.shape[1], dtype=np.intp)
        stride = 1
        for k, ((lo, hi), n) in enumerate(zip(mesh.bounds, mesh.shape)):
            j = np.clip(np.floor((x[k] - lo) / (hi - lo) * n).astype(np.intp), 0, n - 1)
            idx += stride * j
            stride *= n
        return values[..., idx]

    return sample


def reconstruct_gradient(values, mesh: Mesh) -> np.ndarray:
    """Diamond-wise gradient ``d (D_{K sigma} f / d_sigma) n_{K sigma}``.

    Returns shape ``values.shape[:-1] + (n_faces, dimension)``; zero on
    boundary diamonds.
    """
    jumps = face_jumps(values, mesh)
    scale = mesh.dimension * jumps / mesh.face_distances
    return scale[..., None] * mesh.face_normals


def gradient_inner(f, g, mesh: Mesh) -> float:
    """``(1/d) int grad_T f . grad_T g`` via the diamond reconstruction."""
    gf = reconstruct_gradient(f, mesh)
    gg = reconstruct_gradient(g, mesh)
    return float(np.sum(np.sum(gf * gg, axis=-1) * mesh.diamond_measures)) / mesh.dimension


def tpfa_inner(f, g, mesh: Mesh) -> float:
    """``sum_sigma tau_sigma D f D g``."""
    return float(np.sum(mesh.transmissibilities * face_jumps(f, mesh) * face_jumps(g, mesh)))


def edge_cell_gap(U, mesh: Mesh, edge=None):
    """L1 distance between diamond-wise edge values and cell values, per species.

    Returns ``(gap, bound)`` where ``bound`` is the Cauchy-Schwarz estimate
    ``2 h / d * sqrt(sum m_s d_s) * sqrt(sum tau |D u|^2)``.
    """
    U = np.asarray(U, dtype=float)
    ue = log_mean(U[:, mesh.face_owner], U[:, np.where(mesh.interior, mesh.face_neighbor,
                                                        mesh.face_owner)])
    if edge is not None:
        ue = np.asarray(edge)
    half_own = mesh.face_measures * mesh.owner_distances / mesh.dimension
    half_nb = mesh.face_measures * mesh.neighbor_distances / mesh.dimension
    nbidx = np.where(mesh.interior, mesh.face_neighbor, mesh.face_owner)
    gap = (np.abs(ue - U[:, mesh.face_owner]) * half_own
           + np.abs(ue - U[:, nbidx]) * half_nb).sum(axis=1)
    jumps = face_jumps(U, mesh)
    bound = (2 * mesh.size / mesh.dimension
             * math.sqrt(float(np.sum(mesh.face_measures * mesh.face_distances)))
             * np.sqrt(np.sum(mesh.transmissibilities * jumps ** 2, axis=1)))
    return gap, bound


# ---------------------------------------------------------------- errors

def restrict(values, fine: Mesh, coarse: Mesh) -> np.ndarray:
    """Average a fine nested-grid field onto a coarse one."""
    if fine.dimension != coarse.dimension or fine.bounds != coarse.bounds:
        raise ValueError("meshes do not cover the same domain")
    ratios = []
    for nf, nc in zip(fine.shape, coarse.shape):
        if nf % nc:
            raise ValueError(f"grids are not nested ({nf} cells vs {nc})")
        ratios.append(nf // nc)
    values = np.asarray(values, dtype=float)
    lead = values.shape[:-1]
    if fine.dimension == 1:
        (r,), (nc,) = ratios, coarse.shape
        return values.reshape(lead + (nc, r)).mean(axis=-1)
    (rx, ry), (cx, cy) = ratios, coarse.shape
    v = values.reshape(lead + (cy, ry, cx, rx))
    return v.mean(axis=(-1, -3)).reshape(lead + (cx * cy,))


def lp_error(values, reference, mesh: Mesh, p: float = 2.0, reference_mesh=None) -> float:
    """Discrete L^p distance on ``mesh``, summed over species.

    ``reference`` is either a field on the nested finer ``reference_mesh``
    (averaged onto ``mesh`` first), a field on ``mesh`` itself, or a
    :class:`Profile` whose exact cell averages are used.
    """
    values = np.asarray(values, dtype=float)
    if isinstance(reference, Profile):
        ref = reference.cell_averages(mesh)
    elif reference_mesh is not None and reference_mesh is not mesh:
        ref = restrict(reference, reference_mesh, mesh)
    else:
        ref = np.asarray(reference, dtype=float)
    err = np.abs(values - ref)
    if np.isinf(p):
        return float(err.max())
    return float(np.sum(err ** p * mesh.cell_measures) ** (1.0 / p))
