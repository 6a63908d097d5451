"""Reaction source terms R(U) and checks of their structural hypotheses."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ReactionModel:
    """Base class for source terms.

    Subclasses implement :meth:`rates` and :meth:`jacobian` on states of
    shape ``(n_species, n_cells)``.  ``equilibrium`` is an optional positive
    point of the simplex used for the relative entropy.
    """

    n_species: int
    equilibrium = None

    def rates(self, U) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, U) -> np.ndarray:
        """``d r_i / d u_m`` per cell, shape ``(n_cells, n_species, n_species)``."""
        raise NotImplementedError


class NoReaction(ReactionModel):
    def __init__(self, n_species: int):
        self.n_species = n_species

    def rates(self, U):
        return np.zeros_like(np.asarray(U, dtype=float))

    def jacobian(self, U):
        U = np.asarray(U)
        return np.zeros((U.shape[1], self.n_species, self.n_species))


class FunctionReaction(ReactionModel):
    """Wrap a pointwise rate function ``f(U) -> R`` (columns are cells).

    The Jacobian is approximated by central differences; meant for
    validation and tests, not production runs.
    """

    def __init__(self, n_species, func, equilibrium=None):
        self.n_species = n_species
        self.func = func
        self.equilibrium = None if equilibrium is None else np.asarray(equilibrium, float)

    def rates(self, U):
        return np.asarray(self.func(np.asarray(U, dtype=float)), dtype=float)

    def jacobian(self, U, eps=1e-7):
        U = np.asarray(U, dtype=float)
        out = np.empty((U.shape[1], self.n_species, self.n_species))
        for m in range(self.n_species):
            e = np.zeros_like(U)
            e[m] = eps
            out[:, :, m] = ((self.rates(U + e) - self.rates(U - e)) / (2 * eps)).T
        return out


@dataclass(frozen=True)
class MassAction3(ReactionModel):
    """Reversible reaction e1 + e3 <-> 2 e2.

    ``r1 = k_b (u2+)^2 - k_f u1+ u3+``, ``r2 = -2 r1``, ``r3 = r1``.
    """

    forward_rate: float
    backward_rate: float
    equilibrium: np.ndarray | None = field(default=None, compare=False)
    n_species: int = field(default=3, init=False)

    def __post_init__(self):
        if not (self.forward_rate > 0 and self.backward_rate > 0):
            raise ValueError("reaction rates must be positive")

    def with_equilibrium(self, ubar) -> "MassAction3":
        return MassAction3(self.forward_rate, self.backward_rate,
                           np.asarray(ubar, dtype=float))

    def _r1(self, U):
        p = np.maximum(np.asarray(U, dtype=float), 0.0)
        return self.backward_rate * p[1] ** 2 - self.forward_rate * p[0] * p[2]

    def rates(self, U):
        r1 = self._r1(U)
        return np.stack([r1, -2.0 * r1, r1])

    def jacobian(self, U):
        U = np.asarray(U, dtype=float)
        p = np.maximum(U, 0.0)
        on = (U > 0).astype(float)  # subgradient of x+ taken as 0 at 0
        d1 = np.stack([-self.forward_rate * p[2] * on[0],
                       2 * self.backward_rate * p[1] * on[1],
                       -self.forward_rate * p[0] * on[2]], axis=-1)
        return np.stack([d1, -2 * d1, d1], axis=1)


def mass_action_3species(forward_rate: float = 1000.0, backward_rate: float = 1.0):
    return MassAction3(forward_rate, backward_rate)


def steady_state(model: MassAction3, mean_composition=(9 / 44, 2 / 11, 27 / 44)):
    """Spatially constant equilibrium reached from a mean composition.

    The equilibrium is ``(c1 - a, c2 + 2 a, c3 - a)`` where the advancement
    ``a`` is the root of ``k_b (c2 + 2a)^2 = k_f (c1 - a)(c3 - a)`` leaving
    every component nonnegative.

    Returns
    -------
    U_inf : ndarray, shape (3,)
    alpha : float
    """
    c1, c2, c3 = map(float, mean_composition)
    if min(c1, c2, c3) < 0 or not math.isclose(c1 + c2 + c3, 1.0, abs_tol=1e-12):
        raise ValueError("mean composition must lie in the simplex")
    kf, kb = model.forward_rate, model.backward_rate
    # (4 kb - kf) a^2 + (4 kb c2 + kf (c1 + c3)) a + kb c2^2 - kf c1 c3 = 0
    qa = 4 * kb - kf
    qb = 4 * kb * c2 + kf * (c1 + c3)
    qc = kb * c2 ** 2 - kf * c1 * c3
    if qa == 0.0:
        roots = [-qc / qb]
    else:
        disc = qb * qb - 4 * qa * qc
        if disc < 0:
            raise ValueError("no real advancement root")
        sq = math.sqrt(disc)
        # cancellation-free pair
        q = -0.5 * (qb + math.copysign(sq, qb))
        roots = [q / qa, qc / q] if q != 0 else [0.0]
    tol = 1e-14
    ok = [a for a in roots
          if c1 - a >= -tol and c2 + 2 * a >= -tol and c3 - a >= -tol]
    if not ok:
        raise ValueError("no advancement keeps the equilibrium nonnegative")
    alpha = min(ok, key=abs)
    U = np.array([c1 - alpha, c2 + 2 * alpha, c3 - alpha])
    return U, alpha


@dataclass
class ValidationReport:
    samples: int
    isochore_violations: list
    positivity_violations: list
    dissipation_violations: list

    @property
    def passed(self) -> bool:
        return not (self.isochore_violations or self.positivity_violations
                    or self.dissipation_violations)

    def as_dict(self):
        return {
            "samples": self.samples,
            "isochore": {"passed": not self.isochore_violations,
                         "violations": len(self.isochore_violations)},
            "positivity": {"passed": not self.positivity_violations,
                           "violations": len(self.positivity_violations)},
            "entropy_dissipation": {"passed": not self.dissipation_violations,
                                    "violations": len(self.dissipation_violations)},
            "passed": self.passed,
        }


def validate(model: ReactionModel, sample_count: int = 10_000, seed: int = 0,
             equilibrium=None, tol: float = 1e-12) -> ValidationReport:
    """Monte-Carlo check of isochore, positivity and entropy-dissipation.

    Violating samples are collected (as columns) in the report.
    """
    rng = np.random.default_rng(seed)
    n = model.n_species
    ubar = equilibrium if equilibrium is not None else model.equilibrium
    scale_tol = lambda r: tol * (1 + np.abs(r).sum(axis=0))  # noqa: E731

    # (i) on and off the simplex
    on = rng.dirichlet(np.ones(n), size=sample_count).T
    off = rng.uniform(-2.0, 2.0, size=(n, sample_count))
    pts = np.concatenate([on, off], axis=1)
    r = model.rates(pts)
    bad = np.abs(r.sum(axis=0)) > scale_tol(r)
    iso = [pts[:, k] for k in np.flatnonzero(bad)]

    # (ii) one nonpositive coordinate
    pos = []
    for i in range(n):
        q = rng.dirichlet(np.ones(n), size=sample_count).T
        q[i] = -rng.uniform(0.0, 1.0, size=sample_count)
        q[i, : sample_count // 10] = 0.0
        r = model.rates(q)
        bad = r[i] < 0
        pos.extend(q[:, k] for k in np.flatnonzero(bad))

    # (iii) interior of the simplex against the equilibrium
    diss = []
    if ubar is not None:
        ubar = np.asarray(ubar, dtype=float)
        if np.any(ubar <= 0):
            raise ValueError("equilibrium must have positive components")
        q = rng.dirichlet(np.ones(n), size=sample_count).T
        q = np.maximum(q, 1e-300)
        r = model.rates(q)
        prod = np.sum(r * (np.log(q) - np.log(ubar)[:, None]), axis=0)
        bad = prod > tol
        diss = [q[:, k] for k in np.flatnonzero(bad)]
    return ValidationReport(sample_count, iso, pos, diss)
