"""Test-case catalog, grid-convergence harness and a* studies."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import fields
from .fields import BoxProfile, CosineProfile
from .mesh import TimeGrid, build_cartesian_2d, build_uniform_1d
from .reaction import mass_action_3species, steady_state
from .scheme import CrossDiffusionMatrix
from .solver import SolverConfig, final_state

A_LAP = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
A_REG = np.array([[0.0, 0.2, 1.0], [0.2, 0.0, 0.1], [1.0, 0.1, 0.0]])
A_SING = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.1], [1.0, 0.1, 0.0]])
MATRICES = {"lap": A_LAP, "reg": A_REG, "sing": A_SING}

SMOOTH = CosineProfile([0.25, 0.25, 0.5], [0.25, 0.25, -0.5])
ROUGH = BoxProfile([
    [((3 / 8, 5 / 8),)],
    [((1 / 8, 3 / 8),), ((5 / 8, 7 / 8),)],
    [((0.0, 1 / 8),), ((7 / 8, 1.0),)],
])
PROFILES = {"smooth": SMOOTH, "rough": ROUGH}

# 2D reactive setup: species 1 and 2 fill two rectangles of areas 72 and 64
# in (0,22)x(0,16), species 3 the rest -> mean (9/44, 2/11, 27/44)
REACTIVE_DOMAIN = ((0.0, 22.0), (0.0, 16.0))
REACTIVE_PROFILE = BoxProfile(
    [[((2.0, 8.0), (2.0, 14.0))], [((12.0, 20.0), (4.0, 12.0))], []], fill=2)
REACTIVE_MEAN = (9 / 44, 2 / 11, 27 / 44)


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    name: str
    coefficients: np.ndarray
    astar: float
    profile: object
    final_time: float
    dt: float
    cells: tuple = (128,)
    domain: tuple = ((0.0, 1.0),)
    reaction: object = None
    reference: str = "finest"  # "closed_form" | "finest" | "none"

    def mesh(self, cells=None):
        cells = tuple(np.atleast_1d(cells if cells is not None else self.cells))
        if len(self.domain) == 1:
            return build_uniform_1d(self.domain[0], int(cells[0]))
        return build_cartesian_2d(self.domain, int(cells[0]), int(cells[1]))

    def matrix(self, astar=None, check=True):
        return CrossDiffusionMatrix(self.coefficients,
                                    self.astar if astar is None else astar, check=check)

    def time_grid(self, dt=None, final_time=None):
        return TimeGrid.uniform(final_time or self.final_time, dt or self.dt)

    def initial_state(self, mesh=None):
        return fields.project_initial(self.profile, mesh or self.mesh())


def _reactive(name, cells, final_time=50.0):
    model = mass_action_3species(1000.0, 1.0)
    ueq, _ = steady_state(model, REACTIVE_MEAN)
    return TestCase(name, A_SING, 0.1, REACTIVE_PROFILE, final_time, 2.0 ** -3,
                    cells=cells, domain=REACTIVE_DOMAIN,
                    reaction=model.with_equilibrium(ueq), reference="none")


def catalog() -> dict:
    """All named test cases keyed by name."""
    cases = {}
    for mname, A in MATRICES.items():
        for pname, prof in PROFILES.items():
            ref = "closed_form" if (mname == "lap" and pname == "smooth") else "finest"
            name = f"A_{mname}_{pname}"
            cases[name] = TestCase(name, A, 0.1, prof, 0.25, 2.0 ** -14, reference=ref)
    cases["reactive_2d"] = _reactive("reactive_2d", (55, 40))
    cases["reactive_2d_full"] = _reactive("reactive_2d_full", (110, 80))
    return cases


def get_case(name: str) -> TestCase:
    cases = catalog()
    if name not in cases:
        raise KeyError(f"unknown case {name!r}; known: {', '.join(sorted(cases))}")
    return cases[name]


def heat_solution(case: TestCase, t: float) -> CosineProfile:
    """Exact solution at time ``t`` when all a_ij are equal (uncoupled heat)."""
    A = case.coefficients
    off = A[~np.eye(A.shape[0], dtype=bool)]
    if not np.all(off == off[0]) or not isinstance(case.profile, CosineProfile):
        raise ValueError("closed form needs equal coefficients and cosine data")
    p = case.profile
    (lo, hi), = case.domain
    decay = math.exp(-off[0] * (p.wavenumber * math.pi / (hi - lo)) ** 2 * t)
    return CosineProfile(p.offsets, p.amplitudes * decay, p.wavenumber, (lo, hi))


def astar_rule(coefficients, h: float, dt: float, epsilon: float) -> float:
    """``min(max a_ij, max(min a_ij, eps h^2 / dt))`` over i != j."""
    if not (epsilon > 0 and h > 0 and dt > 0):
        raise ValueError("epsilon, h and dt must be positive")
    A = np.asarray(coefficients, dtype=float)
    off = A[~np.eye(A.shape[0], dtype=bool)]
    a = min(off.max(), max(off.min(), epsilon * h * h / dt))
    if not a > 0:
        raise ValueError("rule gives a* = 0 for a zero matrix; set a* explicitly")
    return float(a)


def eoc(errors, cells) -> list:
    """Orders between consecutive refinements: ln(e_k/e_{k+1}) / ln(n_{k+1}/n_k)."""
    return [math.log(errors[k] / errors[k + 1]) / math.log(cells[k + 1] / cells[k])
            for k in range(len(errors) - 1)]


@dataclass
class ConvergenceTable:
    case: str
    cells: list
    errors: list
    eocs: list  # eocs[k] relates cells[k] and cells[k+1]

    def rows(self):
        yield self.cells[0], self.errors[0], float("nan")
        for k in range(1, len(self.cells)):
            yield self.cells[k], self.errors[k], self.eocs[k - 1]


def _run_final(args):
    case, cells, dt, astar, config = args
    mesh = case.mesh(cells)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        matrix = case.matrix(astar)
    return final_state(case.initial_state(mesh), case.time_grid(dt), matrix,
                       mesh, case.reaction, config)


def _map(func, jobs, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(func, jobs))
    return [func(j) for j in jobs]


def reference_solution(case: TestCase, cells: int, dt=None, config=None):
    """Fine-grid final state used as reference; returns ``(state, mesh)``."""
    mesh = case.mesh(cells)
    return _run_final((case, cells, dt or case.dt, None, config)), mesh


def run_convergence(case: TestCase, grid_sizes, dt=None, reference_size=None,
                    reference=None, config=None, workers=1) -> ConvergenceTable:
    """Final-time L2 errors on nested uniform grids and the EOC between them.

    The reference is the closed-form solution when ``case.reference`` says
    so, else ``reference`` (a ``(state, mesh)`` pair) or a fresh run on
    ``reference_size`` cells.
    """
    dt = dt or case.dt
    sizes = [int(n) for n in grid_sizes]
    if sorted(sizes) != sizes or len(set(sizes)) != len(sizes):
        raise ValueError("grid sizes must be strictly increasing")
    if case.reference == "closed_form":
        ref = heat_solution(case, case.final_time)
        ref_mesh = None
    else:
        if reference is None:
            if reference_size is None or reference_size <= sizes[-1]:
                raise ValueError("reference grid must be finer than every tested grid")
            reference = reference_solution(case, reference_size, dt, config)
        ref, ref_mesh = reference
        for n in sizes:
            if ref_mesh.shape[0] % n:
                raise ValueError(f"{n} cells is not nested in the reference grid")
    states = _map(_run_final, [(case, n, dt, None, config) for n in sizes], workers)
    errors = [fields.lp_error(u, ref, case.mesh(n), 2, ref_mesh)
              for n, u in zip(sizes, states)]
    return ConvergenceTable(case.name, sizes, errors, eoc(errors, sizes))


@dataclass
class SweepTable:
    case: str
    astar: list
    errors: list

    @property
    def best(self) -> float:
        return self.astar[int(np.argmin(self.errors))]

    @property
    def ratios(self) -> list:
        e0 = min(self.errors)
        return [e / e0 for e in self.errors]

    def rows(self):
        order = np.argsort(self.astar)
        r = self.ratios
        for k in order:
            yield self.astar[k], self.errors[k], r[k]


def astar_sweep(case: TestCase, astar_values, reference, cells=32, dt=None,
                config=None, refine: bool = False, refine_tol: float = 0.02,
                workers=1) -> SweepTable:
    """Final-time L2 error as a function of a*.

    Any a* > 0 is accepted, including values below ``min a_ij`` (the
    entropy estimate is then weaker but the scheme is still well posed).
    With ``refine`` the coarse
    minimum is refined by golden-section search on ln(a*) between its
    neighbours until the bracket is narrower than ``refine_tol`` (relative).
    """
    dt = dt or case.dt
    ref, ref_mesh = reference
    mesh = case.mesh(cells)
    values = sorted(float(a) for a in astar_values)
    if not values or values[0] <= 0:
        raise ValueError("a* values must be positive")

    def err(a):
        u = _run_final((case, cells, dt, a, config))
        return fields.lp_error(u, ref, mesh, 2, ref_mesh)

    errors = _map(_sweep_job, [(case, cells, dt, a, config, ref, ref_mesh)
                               for a in values], workers)
    table = SweepTable(case.name, list(values), list(errors))
    if refine and len(values) >= 2:
        k = int(np.argmin(errors))
        lo = math.log(values[max(k - 1, 0)])
        hi = math.log(values[min(k + 1, len(values) - 1)])
        cache = {}

        def f(s):
            if s not in cache:
                a = math.exp(s)
                cache[s] = err(a)
                table.astar.append(a)
                table.errors.append(cache[s])
            return cache[s]

        golden_section(f, lo, hi, tol=math.log1p(refine_tol))
    return table


def _sweep_job(args):
    case, cells, dt, a, config, ref, ref_mesh = args
    u = _run_final((case, cells, dt, a, config))
    return fields.lp_error(u, ref, case.mesh(cells), 2, ref_mesh)


def golden_section(f, lo: float, hi: float, tol: float = 1e-3, max_iter: int = 200):
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns the best abscissa."""
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return c if fc < fd else d


def with_overrides(case: TestCase, **kw) -> TestCase:
    return replace(case, **kw)


__all__ = ["A_LAP", "A_REG", "A_SING", "SMOOTH", "ROUGH", "TestCase", "catalog",
           "get_case", "heat_solution", "astar_rule", "eoc", "run_convergence",
           "astar_sweep", "golden_section", "reference_solution", "SolverConfig"]
