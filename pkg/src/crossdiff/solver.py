"""Time stepping with a projected Newton method and lambda/mu continuation."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import fields
from .mesh import Mesh, TimeGrid
from .scheme import (CrossDiffusionMatrix, JacobianLayout, assemble, flatten,
                     unflatten)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-12
    newton_max_iter: int = 20
    floor_factor: float = 1e-10
    continuation_min_gap: float = 1e-6
    # a step is only accepted if |residual| * dt / m_K is below this, plus the
    # residual the floor itself can cause; guards against iterates frozen by
    # the projection
    residual_tol: float = 1e-9
    safeguarded: bool = True
    reproducible: bool = False

    def __post_init__(self):
        if not (self.newton_tol > 0 and self.floor_factor >= 0
                and self.continuation_min_gap > 0 and self.residual_tol > 0):
            raise ValueError("solver tolerances must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")


@dataclass
class NewtonResult:
    state: np.ndarray
    converged: bool
    iterations: int
    residual_norm: float
    reason: str = ""


@dataclass
class StepReport:
    step: int
    time: float
    dt: float
    newton_iterations: int = 0
    path: list = field(default_factory=list)  # (lam, mu, converged, iterations)
    residual_norm: float = float("nan")
    entropy: float = float("nan")
    relative_entropy: float = float("nan")
    dissipation: float = float("nan")
    cross_dissipation: float = float("nan")
    mass: np.ndarray | None = None
    wall_time: float = 0.0

    @property
    def path_length(self) -> int:
        return len(self.path)


class ContinuationStall(RuntimeError):
    """Continuation step fell below the minimal gap; carries the partial report."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


def project_onto_simplex(U, dt: float, floor_factor: float = 1e-10,
                         exact: bool = True) -> np.ndarray:
    """Clamp to ``floor_factor * dt`` from below, then rescale each cell to sum 1.

    With ``exact`` the sum is 1 in floating point (see
    :func:`fields.close_simplex`).  Newton iterates skip that: the closure
    moves a floored last species by ulps of 1, which the iteration would
    amplify through stiff reactions.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    V = np.maximum(np.asarray(U, dtype=float), floor_factor * dt)
    V = V / V.sum(axis=0)
    return fields.close_simplex(V) if exact else V


def _heat_layout(mesh):
    return JacobianLayout(mesh, 1)


def heat_seed(U_old, dt: float, astar: float, mesh: Mesh, layout=None) -> np.ndarray:
    """Backward-Euler TPFA heat step with diffusivity ``a*`` for every species."""
    if not (dt > 0 and astar > 0):
        raise ValueError("heat seed needs dt > 0 and a* > 0")
    U_old = np.asarray(U_old, dtype=float)
    layout = layout or _heat_layout(mesh)
    own, nb, tau = mesh.interior_faces()
    m = mesh.cell_measures
    t = astar * tau
    # F = -t (u_L - u_K): d/du_K = t, d/du_L = -t
    vals = layout.values((m / dt)[:, None, None], t[:, None, None], -t[:, None, None])
    rhs = (m / dt) * U_old
    out = np.empty_like(U_old)
    for i in range(U_old.shape[0]):
        out[i] = layout.solve(vals, rhs[i])
    if not np.all(np.isfinite(out)):
        raise np.linalg.LinAlgError("singular heat system")
    return out


class StepSolver:
    """Reusable per-mesh machinery for one backward-Euler step."""

    def __init__(self, mesh: Mesh, matrix: CrossDiffusionMatrix, reaction=None,
                 config: SolverConfig | None = None):
        self.mesh = mesh
        self.matrix = matrix
        self.reaction = reaction
        self.config = config or SolverConfig()
        self.layout = JacobianLayout(mesh, matrix.n_species)
        self.heat_layout = _heat_layout(mesh)

    def seed(self, U_old, dt):
        return heat_seed(U_old, dt, self.matrix.astar, self.mesh, self.heat_layout)

    def newton(self, U_old, dt, lam=1.0, mu=0.0, seed=None) -> NewtonResult:
        """Projected Newton iteration for the step ``U_old -> U`` at (lam, mu)."""
        cfg = self.config
        n = self.matrix.n_species
        U = self.seed(U_old, dt) if seed is None else np.array(seed, dtype=float)
        reaction = self.reaction if mu else None
        for k in range(1, cfg.newton_max_iter + 1):
            res, vals = assemble(U, U_old, dt, self.matrix, self.mesh, self.layout,
                                 lam, mu, reaction, cfg.safeguarded)
            if not (np.all(np.isfinite(res)) and np.all(np.isfinite(vals))):
                return NewtonResult(U, False, k, float("nan"), "non-finite residual")
            try:
                delta = self.layout.solve(vals, -res)
            except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
                return NewtonResult(U, False, k, float(np.abs(res).max()),
                                    f"linear solve failed: {exc}")
            if not np.all(np.isfinite(delta)):
                return NewtonResult(U, False, k, float(np.abs(res).max()),
                                    "non-finite increment")
            U_next = project_onto_simplex(U + unflatten(delta, n), dt, cfg.floor_factor,
                                          exact=False)
            change = float(np.abs(U_next - U).max())
            U = U_next
            if change <= cfg.newton_tol:
                res, vals = assemble(U, U_old, dt, self.matrix, self.mesh, self.layout,
                                     lam, mu, reaction, cfg.safeguarded)
                scale = dt / np.repeat(self.mesh.cell_measures, n)
                scaled = float(np.abs(res * scale).max())
                if scaled > cfg.residual_tol:
                    # entries held at the floor leave a residual of up to |J| * floor
                    jac = abs(self.layout.to_csc(vals)).sum(axis=1).A1
                    slack = float((jac * scale).max()) * cfg.floor_factor * dt
                    scaled -= slack
                if scaled > cfg.residual_tol:
                    return NewtonResult(U, False, k, float(np.abs(res).max()),
                                        f"stagnated with scaled residual {scaled:.2e}")
                return NewtonResult(fields.close_simplex(U), True, k,
                                    float(np.abs(res).max()))
        return NewtonResult(U, False, cfg.newton_max_iter, float("nan"),
                            "iteration limit")

    def advance(self, U_old, dt, report: StepReport | None = None):
        """Solve one step at lam = mu = 1, with continuation on failure.

        Without reaction only lam is continued.  With reaction: try
        (1, 1); on failure ramp mu from 1/2 to 1 at lam = 0, then ramp lam
        to 1 at mu = 1.  Each ramp restarts at 1 after a success and
        bisects towards the last success after a failure.
        """
        report = report if report is not None else StepReport(0, 0.0, dt)
        has_reaction = self.reaction is not None
        mu_full = 1.0 if has_reaction else 0.0
        base = self.seed(U_old, dt)

        def attempt(lam, mu, start):
            r = self.newton(U_old, dt, lam, mu, seed=start)
            report.path.append((lam, mu, r.converged, r.iterations))
            report.newton_iterations += r.iterations
            log.debug("lam=%g mu=%g converged=%s its=%d %s", lam, mu,
                      r.converged, r.iterations, r.reason)
            return r

        def ramp(start, set_pair, first):
            prev, cur, state = 0.0, first, start
            while True:
                r = attempt(*set_pair(cur), state)
                if r.converged:
                    if cur == 1.0:
                        return r
                    prev, state, cur = cur, r.state, 1.0
                else:
                    cur = 0.5 * (cur + prev)
                    if cur - prev < self.config.continuation_min_gap:
                        raise ContinuationStall(
                            f"continuation stalled at {set_pair(prev)}", report)

        r = attempt(1.0, mu_full, base)
        if not r.converged:
            if has_reaction:
                r_mu = ramp(base, lambda mu: (0.0, mu), 0.5)
                r = ramp(r_mu.state, lambda lam: (lam, 1.0), 1.0)
            else:
                r = ramp(base, lambda lam: (lam, 0.0), 0.5)
        report.residual_norm = r.residual_norm
        return r.state, report


@dataclass
class Trajectory:
    times: list
    states: list
    reports: list


def simulate(U0, grid: TimeGrid, matrix: CrossDiffusionMatrix, mesh: Mesh,
             reaction=None, config: SolverConfig | None = None, observers=(),
             stride: int = 1, reference=None, diagnostics: bool = True) -> Trajectory:
    """Run the scheme over ``grid``.

    Snapshots are kept every ``stride`` steps (plus the initial and final
    states).  ``reference`` is the constant state of the relative entropy;
    it defaults to the reaction equilibrium, else to the mean of ``U0``.
    Observers are called as ``obs(step, t, U, report)``.
    """
    config = config or SolverConfig()
    U = np.array(U0, dtype=float)
    if U.shape != (matrix.n_species, mesh.n_cells):
        raise ValueError("initial state does not match mesh and matrix")
    if np.any(U < 0) or np.any(np.abs(U.sum(axis=0) - 1.0) > 1e-12):
        raise ValueError("initial state must lie in the simplex")
    stepper = StepSolver(mesh, matrix, reaction, config)
    if reference is None:
        if reaction is not None and getattr(reaction, "equilibrium", None) is not None:
            reference = reaction.equilibrium
        else:
            reference = (U @ mesh.cell_measures) / mesh.measure
    reference = np.asarray(reference, dtype=float)
    rep = config.reproducible

    def diagnose(report, state):
        if not diagnostics:
            return
        report.entropy = fields.entropy(state, mesh, rep)
        if np.all(reference > 0):
            report.relative_entropy = fields.relative_entropy(state, reference, mesh, rep)
        report.dissipation, report.cross_dissipation = fields.dissipation(
            state, mesh, matrix, reproducible=rep)
        report.mass = np.array([fields.total(state[i] * mesh.cell_measures, rep)
                                for i in range(state.shape[0])])

    r0 = StepReport(0, 0.0, 0.0)
    diagnose(r0, U)
    traj = Trajectory([0.0], [U.copy()], [r0])
    for obs in observers:
        obs(0, 0.0, U, r0)
    steps = grid.steps
    for n, dt in enumerate(steps, start=1):
        tic = time.perf_counter()
        report = StepReport(n, float(grid.times[n]), float(dt))
        U, report = stepper.advance(U, float(dt), report)
        report.wall_time = time.perf_counter() - tic
        diagnose(report, U)
        traj.reports.append(report)
        if n % stride == 0 or n == len(steps):
            traj.times.append(float(grid.times[n]))
            traj.states.append(U.copy())
        for obs in observers:
            obs(n, float(grid.times[n]), U, report)
    return traj


def final_state(U0, grid, matrix, mesh, reaction=None, config=None) -> np.ndarray:
    """Final state only, without per-step diagnostics."""
    traj = simulate(U0, grid, matrix, mesh, reaction, config,
                    stride=grid.n_steps, diagnostics=False)
    return traj.states[-1]


def newton_solve(U_old, dt, matrix, mesh, lam=1.0, mu=0.0, reaction=None,
                 config=None, seed=None) -> NewtonResult:
    return StepSolver(mesh, matrix, reaction, config).newton(U_old, dt, lam, mu, seed)


def continuation_advance(U_old, dt, matrix, mesh, reaction=None, config=None):
    return StepSolver(mesh, matrix, reaction, config).advance(U_old, dt)


class InvariantMonitor:
    """Observer recording the worst violation of each structural property.

    ``worst`` maps a check name to the largest observed excess (<= 0 means
    the property held everywhere, up to the given slack).
    """

    def __init__(self, mesh: Mesh, matrix: CrossDiffusionMatrix, reaction=None,
                 mass_tol=1e-10, entropy_tol=1e-10, eed_tol=1e-8,
                 relative_entropy_tol=1e-8):
        self.mesh, self.matrix, self.reaction = mesh, matrix, reaction
        self.tols = {"simplex": 0.0, "positivity": 0.0, "mass": mass_tol,
                     "entropy": entropy_tol, "eed": eed_tol,
                     "relative_entropy": relative_entropy_tol}
        self.worst = {"simplex": -np.inf, "positivity": -np.inf}
        if reaction is None:
            self.worst.update(mass=-np.inf, entropy=-np.inf)
            if matrix.nondegenerate:
                self.worst["eed"] = -np.inf
        else:
            self.worst["relative_entropy"] = -np.inf
        self._prev = None
        self._mass0 = None

    def _bump(self, key, value):
        self.worst[key] = max(self.worst[key], float(value))

    def __call__(self, step, t, U, report):
        self._bump("simplex", np.abs(U.sum(axis=0) - 1.0).max())
        if step == 0:
            self._mass0 = report.mass
        elif self._prev is not None:
            self._bump("positivity", -U.min())  # initial data may touch 0
            if "mass" in self.worst:
                scale = np.where(self._mass0 > 0, self._mass0, self.mesh.measure)
                drift = np.abs(report.mass - self._mass0) / scale
                self._bump("mass", drift.max())
                self._bump("entropy", report.entropy - self._prev.entropy)
            if "eed" in self.worst:
                self._bump("eed", report.entropy - self._prev.entropy
                           + report.dt * self.matrix.min_offdiag * report.dissipation)
            if "relative_entropy" in self.worst:
                self._bump("relative_entropy",
                           report.relative_entropy - self._prev.relative_entropy)
        self._prev = report

    def verdicts(self) -> dict:
        out = {}
        for key, value in self.worst.items():
            tol = self.tols[key]
            ok = value < tol if key == "positivity" else value <= tol
            out[key] = {"worst": value if np.isfinite(value) else None,
                        "tolerance": tol, "passed": bool(ok)}
        return out

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.verdicts().values())
