import math

import numpy as np
import pytest

from crossdiff.experiments import A_LAP, A_REG, A_SING, ROUGH, SMOOTH
from crossdiff.fields import entropy, project_initial
from crossdiff.mesh import TimeGrid, build_cartesian_2d, build_uniform_1d
from crossdiff.reaction import mass_action_3species
from crossdiff.scheme import CrossDiffusionMatrix, residual
from crossdiff.solver import (ContinuationStall, InvariantMonitor, NewtonResult,
                              SolverConfig, StepReport, StepSolver, heat_seed,
                              newton_solve, project_onto_simplex, simulate)

from conftest import quiet_matrix, random_simplex


def test_projection_examples():
    V = project_onto_simplex(np.array([[0.5], [0.5], [0.0]]), 1.0)
    assert np.allclose(V[:, 0], np.array([0.5, 0.5, 1e-10]) / (1 + 1e-10), rtol=1e-15)
    U = np.array([[0.2], [0.3], [0.5]])
    assert np.array_equal(project_onto_simplex(U, 1.0), U)
    V = project_onto_simplex(np.array([[-0.2], [0.6], [0.6]]), 1.0)
    assert np.allclose(V[:, 0], np.array([1e-10, 0.6, 0.6]) / (1.2 + 1e-10), rtol=1e-15)


def test_projection_floor(rng):
    U = rng.normal(size=(4, 100))
    V = project_onto_simplex(U, 0.01)
    assert V.min() >= 1e-11 * 0.01
    assert np.all(V.sum(axis=0) == 1.0)


def test_heat_seed_examples(rng, mesh2d):
    U = np.tile(np.array([[0.2], [0.8]]), mesh2d.n_cells)
    assert np.allclose(heat_seed(U, 0.1, 0.3, mesh2d), U, rtol=1e-14)
    U = random_simplex(rng, 3, mesh2d.n_cells)
    V = heat_seed(U, 0.1, 0.3, mesh2d)
    assert np.allclose(V @ mesh2d.cell_measures, U @ mesh2d.cell_measures, rtol=1e-13)
    m = build_uniform_1d((0, 1), 2)
    V = heat_seed(np.array([[0.2, 0.6]]), 1e6, 1.0, m)
    assert np.allclose(V, 0.4, rtol=1e-6)
    assert V.sum() == pytest.approx(0.8, rel=1e-9)


def test_newton_linear_case(rng, mesh1d):
    M = CrossDiffusionMatrix(A_REG, 0.1)
    U0 = random_simplex(rng, 3, mesh1d.n_cells, floor=1e-2)
    r = newton_solve(U0, 1e-3, M, mesh1d, lam=0.0)
    assert r.converged and r.iterations <= 2


def test_newton_all_equal_is_heat(rng, mesh1d):
    A = np.ones((3, 3)) - np.eye(3)
    M = CrossDiffusionMatrix(A, 1.0)
    U0 = random_simplex(rng, 3, mesh1d.n_cells, floor=1e-2)
    r = newton_solve(U0, 1e-2, M, mesh1d)
    assert r.converged
    assert np.abs(r.state - heat_seed(U0, 1e-2, 1.0, mesh1d)).max() <= 1e-12


def test_newton_stress_no_crash():
    mesh = build_uniform_1d((0, 1), 32)
    M = CrossDiffusionMatrix(A_SING, 0.1, check=False)
    U0 = project_initial(ROUGH, mesh)
    r = newton_solve(U0, 1e6, M, mesh)
    assert isinstance(r, NewtonResult)
    assert r.iterations <= 20
    if not r.converged:
        assert r.iterations == 20 or r.reason


def test_continuation_direct_success(mesh1d):
    M = CrossDiffusionMatrix(A_REG, 0.1)
    U0 = project_initial(SMOOTH, mesh1d)
    U, rep = StepSolver(mesh1d, M).advance(U0, 2.0 ** -10)
    assert rep.path_length == 1 and rep.path[0][:3] == (1.0, 0.0, True)


class Scripted(StepSolver):
    """Newton replaced by a script of (lam, mu) -> converged answers."""

    def __init__(self, mesh, matrix, reaction, fail):
        super().__init__(mesh, matrix, reaction)
        self.fail = fail
        self.calls = []

    def newton(self, U_old, dt, lam=1.0, mu=0.0, seed=None):
        self.calls.append((lam, mu))
        ok = not self.fail(lam, mu, len(self.calls))
        return NewtonResult(U_old, ok, 1, 0.0)


def test_bisection_arithmetic(mesh1d):
    M = CrossDiffusionMatrix(A_REG, 0.1)
    U0 = project_initial(SMOOTH, mesh1d)
    s = Scripted(mesh1d, M, None, lambda lam, mu, k: lam >= 0.5 and k <= 3)
    s.advance(U0, 0.01)
    assert s.calls[:4] == [(1.0, 0.0), (0.5, 0.0), (0.25, 0.0), (1.0, 0.0)]


def test_success_resets_to_one(mesh1d):
    M = CrossDiffusionMatrix(A_REG, 0.1)
    U0 = project_initial(SMOOTH, mesh1d)
    # fail at lam=1 twice, then succeed everywhere
    s = Scripted(mesh1d, M, None, lambda lam, mu, k: k <= 2)
    s.advance(U0, 0.01)
    assert s.calls == [(1.0, 0.0), (0.5, 0.0), (0.25, 0.0), (1.0, 0.0)]


def test_reactive_ramp_order(mesh1d):
    M = CrossDiffusionMatrix(A_SING, 0.1, check=False)
    U0 = project_initial(SMOOTH, mesh1d)
    s = Scripted(mesh1d, M, mass_action_3species(), lambda lam, mu, k: k == 1)
    s.advance(U0, 0.01)
    assert s.calls == [(1.0, 1.0), (0.0, 0.5), (0.0, 1.0), (1.0, 1.0)]


def test_stall_raises(mesh1d):
    M = CrossDiffusionMatrix(A_REG, 0.1)
    U0 = project_initial(SMOOTH, mesh1d)
    s = Scripted(mesh1d, M, None, lambda lam, mu, k: True)
    with pytest.raises(ContinuationStall) as err:
        s.advance(U0, 0.01)
    assert err.value.report.path_length > 10
    assert all(lam > 0 for lam, *_ in err.value.report.path)


def test_simulate_constant_state(mesh2d):
    M = CrossDiffusionMatrix(A_REG, 0.1)
    U0 = np.tile(np.array([[0.2], [0.3], [0.5]]), mesh2d.n_cells)
    traj = simulate(U0, TimeGrid.uniform(0.1, 0.025), M, mesh2d)
    for U in traj.states:
        assert np.allclose(U, U0, rtol=1e-15)
    assert all(r.newton_iterations <= 1 for r in traj.reports[1:])


def test_simulate_rejects_bad_state(mesh1d):
    M = CrossDiffusionMatrix(A_REG, 0.1)
    with pytest.raises(ValueError):
        simulate(np.full((3, mesh1d.n_cells), 0.5), TimeGrid.uniform(0.1, 0.05), M, mesh1d)
    with pytest.raises(ValueError):
        simulate(np.full((2, mesh1d.n_cells), 0.5), TimeGrid.uniform(0.1, 0.05), M, mesh1d)


def test_simulate_outputs_in_simplex_and_monotone(mesh2d):
    M = CrossDiffusionMatrix(A_SING, 0.1, check=False)
    rng = np.random.default_rng(4)
    U0 = random_simplex(rng, 3, mesh2d.n_cells)
    seen = []
    traj = simulate(U0, TimeGrid.uniform(0.2, 0.02), M, mesh2d,
                    observers=[lambda n, t, U, r: seen.append(n)], stride=3)
    assert seen == list(range(11))
    assert len(traj.states) == 1 + 3 + 1
    for U in traj.states[1:]:
        assert np.all(U.sum(axis=0) == 1.0)
        assert U.min() >= 1e-11 * 0.02
    E = [r.entropy for r in traj.reports]
    assert np.all(np.diff(E) <= 1e-12)


def test_scheme_solution_solves_residual(rng, mesh1d):
    M = CrossDiffusionMatrix(A_REG, 0.1)
    U0 = project_initial(SMOOTH, mesh1d)
    U, _ = StepSolver(mesh1d, M).advance(U0, 1e-3)
    assert np.abs(residual(U, U0, 1e-3, M, mesh1d)).max() < 1e-9


def test_monitor_verdicts(mesh1d):
    M = CrossDiffusionMatrix(A_REG, 0.1)
    U0 = project_initial(SMOOTH, mesh1d)
    mon = InvariantMonitor(mesh1d, M)
    simulate(U0, TimeGrid.uniform(0.01, 0.001), M, mesh1d, observers=[mon])
    v = mon.verdicts()
    assert set(v) == {"simplex", "positivity", "mass", "entropy", "eed"}
    assert mon.passed


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(newton_tol=0)
    with pytest.raises(ValueError):
        SolverConfig(newton_max_iter=0)


def test_stiff_reaction_near_floor():
    # species held at the floor under k = 1000 leave a small residual that
    # must not count as stagnation, and iterates must not jitter at the ulp level
    from crossdiff.experiments import get_case
    case = get_case("reactive_2d")
    mesh = case.mesh()
    stepper = StepSolver(mesh, case.matrix(), case.reaction)
    U = case.initial_state(mesh)
    paths = []
    for _ in range(4):
        U, report = stepper.advance(U, case.dt)
        paths.append(report.path)
        assert np.all(U.sum(axis=0) == 1.0)
    assert len(paths[0]) == 1 and paths[0][0][2]
    assert all(its < stepper.config.newton_max_iter for p in paths for *_, its in p)
