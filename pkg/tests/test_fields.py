import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crossdiff import fields
from crossdiff.experiments import ROUGH, SMOOTH, REACTIVE_MEAN
from crossdiff.fields import (BoxProfile, ConstantProfile, CosineProfile, SampledProfile,
                              dissipation, entropy, lp_error, project_initial,
                              relative_entropy)
from crossdiff.mesh import build_cartesian_2d, build_uniform_1d
from crossdiff.reaction import mass_action_3species, steady_state
from crossdiff.scheme import CrossDiffusionMatrix, log_mean

from conftest import random_simplex


def test_rough_profile_on_eight_cells():
    U = project_initial(ROUGH, build_uniform_1d((0, 1), 8))
    assert np.array_equal(U[0], [0, 0, 0, 1, 1, 0, 0, 0])
    assert np.array_equal(U[2], [1, 0, 0, 0, 0, 0, 0, 1])


def test_constant_profile():
    U = project_initial(ConstantProfile([1 / 3] * 3), build_uniform_1d((0, 1), 5))
    assert np.allclose(U, 1 / 3, rtol=1e-15)


def test_cosine_exact_cell_means():
    m = build_uniform_1d((0, 1), 4)
    U = SMOOTH.cell_averages(m)
    xl, xr = np.arange(4) / 4, np.arange(1, 5) / 4
    expect = 0.25 + 0.25 * (np.sin(np.pi * xr) - np.sin(np.pi * xl)) / (np.pi * 0.25)
    assert np.allclose(U[0], expect, rtol=1e-14)
    assert np.allclose(U.sum(axis=0), 1.0, rtol=1e-15)


def test_project_rejects_bad_profiles():
    m = build_uniform_1d((0, 1), 4)
    with pytest.raises(ValueError):
        project_initial(ConstantProfile([0.5, 0.6]), m)
    with pytest.raises(ValueError):
        project_initial(ConstantProfile([1.2, -0.2]), m)


def test_sampled_profile():
    prof = SampledProfile(2, lambda x: np.stack([x[0], 1 - x[0]]))
    U = project_initial(prof, build_uniform_1d((0, 1), 4))
    assert np.allclose(U[0], [0.125, 0.375, 0.625, 0.875])


def test_box_profile_2d_partial_overlap():
    m = build_cartesian_2d(((0, 2), (0, 2)), 2, 2)
    prof = BoxProfile([[((0.5, 1.5), (0.0, 1.0))], []], fill=1)
    U = project_initial(prof, m)
    assert np.allclose(U[0], [0.5, 0.5, 0.0, 0.0])
    assert np.allclose(U.sum(axis=0), 1.0)


def test_reactive_layout_mean():
    from crossdiff.experiments import get_case
    case = get_case("reactive_2d")
    mesh = case.mesh()
    U = case.initial_state(mesh)
    assert np.allclose(U @ mesh.cell_measures / mesh.measure, REACTIVE_MEAN, rtol=1e-13)


# --------------------------------------------------------------- entropy

def test_entropy_examples():
    m = build_uniform_1d((0, 1), 10)
    assert entropy(np.full((3, 10), 1 / 3), m) == pytest.approx(math.log(1 / 3), rel=1e-14)
    pure = np.zeros((3, 10))
    pure[0] = 1
    assert entropy(pure, m) == 0.0
    assert entropy(project_initial(ROUGH, build_uniform_1d((0, 1), 64)),
                   build_uniform_1d((0, 1), 64)) == 0.0


def test_relative_entropy_examples():
    m = build_uniform_1d((0, 1), 6)
    ubar = np.array([0.5, 0.25, 0.25])
    assert relative_entropy(np.tile(ubar[:, None], 6), ubar, m) == pytest.approx(0, abs=1e-16)
    pure = np.zeros((3, 6))
    pure[0] = 1
    assert relative_entropy(pure, ubar, m) == pytest.approx(math.log(2), rel=1e-15)
    ueq, _ = steady_state(mass_action_3species(), REACTIVE_MEAN)
    m2 = build_cartesian_2d(((0, 22), (0, 16)), 11, 8)
    assert relative_entropy(np.tile(ueq[:, None], m2.n_cells), ueq, m2) == \
        pytest.approx(0, abs=1e-12)
    with pytest.raises(ValueError):
        relative_entropy(pure, [1.0, 0.0, 0.0], m)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_relative_entropy_nonnegative(seed):
    rng = np.random.default_rng(seed)
    m = build_uniform_1d((0, 1), 9)
    U = random_simplex(rng, 3, 9)
    ubar = rng.dirichlet(np.ones(3))
    assert relative_entropy(U, ubar, m) >= -1e-14


def test_reproducible_sum_is_order_independent(rng):
    v = rng.normal(size=10000) * 10.0 ** rng.integers(-8, 8, 10000)
    assert fields.total(v, True) == fields.total(v[::-1], True) == math.fsum(v)


# --------------------------------------------------------------- dissipation

def test_dissipation_examples():
    m = build_uniform_1d((0, 1), 2)
    assert dissipation(np.full((3, 2), 1 / 3), m) == 0.0
    U = np.array([[0.25, 0.75], [0.75, 0.25]])
    ue = 0.5 / math.log(3)
    assert log_mean(0.25, 0.75) == pytest.approx(ue, rel=1e-15)
    # each species contributes tau u_s (ln 3)^2 = ln 3
    assert dissipation(U[:1], m) == pytest.approx(math.log(3), rel=1e-14)
    assert dissipation(U, m) == pytest.approx(math.log(9), rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(2, 5))
def test_dissipation_identity(seed, n):
    rng = np.random.default_rng(seed)
    m = build_uniform_1d((0, 1), 7)
    U = random_simplex(rng, n, 7, floor=1e-6)
    ones = np.ones((n, n)) - np.eye(n)
    fisher, cross = dissipation(U, m, CrossDiffusionMatrix(ones, 1.0))
    inner = m.interior
    K, L = m.face_owner[inner], m.face_neighbor[inner]
    ue = log_mean(U[:, K], U[:, L])
    dl = np.log(U[:, L]) - np.log(U[:, K])
    tau = m.transmissibilities[inner]
    rhs = np.sum(tau * ue * (1 - ue.sum(axis=0)) * dl ** 2)
    assert fisher - cross == pytest.approx(rhs, rel=1e-9, abs=1e-12)
    assert fisher - cross >= -1e-12


# --------------------------------------------------------------- reconstructions

def test_gradient_examples():
    m = build_uniform_1d((0, 1), 8)
    assert np.all(fields.reconstruct_gradient(np.full(8, 0.3), m) == 0)
    g = fields.reconstruct_gradient(m.cell_centers[:, 0], m)
    assert np.allclose(g[m.interior, 0], 1.0, rtol=1e-13)


@settings(max_examples=30, deadline=None)
@given(nx=st.integers(2, 9), ny=st.integers(2, 9), lx=st.floats(0.2, 20),
       ly=st.floats(0.2, 20), seed=st.integers(0, 2 ** 32 - 1))
def test_norm_identity(nx, ny, lx, ly, seed):
    m = build_cartesian_2d(((0, lx), (0, ly)), nx, ny)
    f = np.random.default_rng(seed).normal(size=m.n_cells)
    assert fields.tpfa_inner(f, f, m) == pytest.approx(fields.gradient_inner(f, f, m),
                                                       rel=1e-12)


def test_cellwise_sampler(mesh2d):
    v = np.arange(mesh2d.n_cells, dtype=float)
    s = fields.reconstruct_cellwise(v, mesh2d)
    assert np.array_equal(s(mesh2d.cell_centers.T), v)


def test_edge_cell_gap_bound(rng):
    m = build_uniform_1d((0, 1), 32)
    U = random_simplex(rng, 3, 32, floor=1e-3)
    gap, bound = fields.edge_cell_gap(U, m)
    assert np.all(gap <= bound + 1e-14)


# --------------------------------------------------------------- errors

def test_lp_error_examples():
    coarse = build_uniform_1d((0, 1), 4)
    fine = build_uniform_1d((0, 1), 16)
    assert lp_error(np.full((1, 4), 0.5), np.full((1, 4), 0.5), coarse) == 0
    assert lp_error(np.full((1, 4), 0.5), np.full((1, 16), 0.25), coarse, 2, fine) == \
        pytest.approx(0.25, rel=1e-15)
    assert lp_error(np.full((1, 4), 0.5), np.full((1, 16), 0.25), coarse, np.inf, fine) == 0.25
    with pytest.raises(ValueError):
        lp_error(np.zeros((1, 4)), np.zeros((1, 6)), coarse, 2, build_uniform_1d((0, 1), 6))


def test_restrict_2d():
    fine = build_cartesian_2d(((0, 1), (0, 1)), 4, 4)
    coarse = build_cartesian_2d(((0, 1), (0, 1)), 2, 2)
    v = np.arange(16, dtype=float)
    assert np.allclose(fields.restrict(v, fine, coarse), [(0 + 1 + 4 + 5) / 4,
                                                          (2 + 3 + 6 + 7) / 4,
                                                          (8 + 9 + 12 + 13) / 4,
                                                          (10 + 11 + 14 + 15) / 4])


def test_lp_error_against_profile():
    m = build_uniform_1d((0, 1), 16)
    U = SMOOTH.cell_averages(m)
    assert lp_error(U, SMOOTH, m) == 0.0
    assert lp_error(U, CosineProfile([0.25, 0.25, 0.5], [0.0, 0.25, -0.5]), m) > 0
