import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crossdiff.reaction import (FunctionReaction, MassAction3, NoReaction,
                                mass_action_3species, steady_state, validate)

EXPECTED_ALPHA = (4504 - 5 * math.sqrt(206530)) / 10956
MEAN = (9 / 44, 2 / 11, 27 / 44)


def test_rate_examples():
    R = mass_action_3species()
    assert np.all(R.rates(np.zeros((3, 1))) == 0)
    assert np.all(R.rates(np.array([[1.0], [0.0], [0.0]])) == 0)
    r = R.rates(np.array([[0.5], [0.0], [0.5]]))[:, 0]
    assert np.allclose(r, [-250, 500, -250])
    # detailed-balance manifold u2^2 = 1000 u1 u3
    u1, u3 = 0.001, 0.4
    u2 = math.sqrt(1000 * u1 * u3)
    assert np.allclose(R.rates(np.array([[u1], [u2], [u3]])), 0, atol=1e-15)


def test_positive_parts_used():
    R = mass_action_3species()
    r = R.rates(np.array([[-0.3], [0.5], [0.8]]))[:, 0]
    assert np.allclose(r, [0.25, -0.5, 0.25])


@settings(max_examples=200, deadline=None)
@given(u=st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_isochore_exact(u):
    r = mass_action_3species().rates(np.array(u)[:, None])
    assert r.sum() == 0.0 or abs(r.sum()) <= 4e-16 * np.abs(r).sum()


def test_jacobian_fd(rng):
    R = mass_action_3species(1000, 1)
    U = rng.uniform(0.01, 1, (3, 20))
    F = FunctionReaction(3, R.rates)
    assert np.allclose(R.jacobian(U), F.jacobian(U), rtol=1e-6, atol=1e-6)


def test_steady_state_closed_form():
    R = mass_action_3species()
    U, alpha = steady_state(R, MEAN)
    assert abs(alpha - EXPECTED_ALPHA) <= 1e-12
    assert alpha == pytest.approx(0.20370, abs=5e-6)
    assert np.allclose(U, [9 / 44 - alpha, 2 / 11 + 2 * alpha, 27 / 44 - alpha])
    assert U[1] ** 2 / (U[0] * U[2]) == pytest.approx(1000, rel=1e-8)
    assert np.abs(R.rates(U[:, None])).max() <= 1e-12


def test_steady_state_symmetric():
    _, alpha = steady_state(MassAction3(1.0, 1.0), (1 / 3, 1 / 3, 1 / 3))
    assert alpha == 0.0


def test_steady_state_rejects_bad_mean():
    with pytest.raises(ValueError):
        steady_state(mass_action_3species(), (0.5, 0.5, 0.5))


def test_rates_must_be_positive():
    with pytest.raises(ValueError):
        MassAction3(0.0, 1.0)


def test_validate_mass_action():
    R = mass_action_3species()
    ueq, _ = steady_state(R, MEAN)
    rep = validate(R.with_equilibrium(ueq), 10_000, seed=7)
    assert rep.passed
    assert rep.as_dict()["passed"]


def test_validate_trivial_and_adversarial():
    assert validate(NoReaction(3), 1000, equilibrium=[1 / 3] * 3).passed
    bad = FunctionReaction(3, lambda U: np.stack([U[0], 0 * U[0], 0 * U[0]]))
    rep = validate(bad, 1000, seed=1)
    assert rep.isochore_violations and not rep.passed


def test_validate_detects_wrong_equilibrium():
    R = mass_action_3species()
    rep = validate(R, 2000, seed=3, equilibrium=[1 / 3, 1 / 3, 1 / 3])
    assert rep.dissipation_violations


def test_validate_detects_positivity_breach():
    bad = FunctionReaction(2, lambda U: np.stack([-np.ones_like(U[0]), np.ones_like(U[0])]))
    rep = validate(bad, 500, seed=0)
    assert rep.positivity_violations
