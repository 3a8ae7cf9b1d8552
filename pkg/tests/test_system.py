import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import random_system

from phsoc.errors import InvalidInput, StructureViolation
from phsoc.models import example53, heat1d, mechanical
from phsoc.system import (
    controllability_matrix,
    energy_balance_residual,
    is_controllable,
    objective_value,
    validate,
    validate_cost,
)

J51 = [[0, -1], [1, 0]]
B51 = [[1], [0]]


def test_validate_mechanical_example():
    sys = validate(J51, np.diag([1.0, 0.0]), np.eye(2), B51)
    assert (sys.n, sys.m) == (2, 1)
    assert np.allclose(sys.A, [[-1, -1], [1, 0]])
    assert sys.is_real


def test_validate_rejects_non_skew_J():
    with pytest.raises(StructureViolation) as exc:
        validate([[0, 1], [-1, 1]], np.zeros((2, 2)), np.eye(2), B51)
    which = [w for w, _ in exc.value.violations]
    assert which == ["J not skew-Hermitian"]
    assert exc.value.violations[0][1] == pytest.approx(2.0)


def test_validate_lists_every_violation():
    with pytest.raises(StructureViolation) as exc:
        validate([[0, 1], [-1, 1]], np.diag([-1.0, 0.0]), np.eye(2), B51)
    which = [w for w, _ in exc.value.violations]
    assert "R not positive semidefinite" in which and "J not skew-Hermitian" in which
    mag = dict(exc.value.violations)["R not positive semidefinite"]
    assert mag == pytest.approx(1.0)


def test_validate_dimension_errors():
    with pytest.raises(InvalidInput):
        validate(np.zeros((2, 2)), np.zeros((3, 3)), np.eye(2), B51)
    with pytest.raises(InvalidInput):
        validate(np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2), [[1, 0, 0]])


def test_more_inputs_than_states_is_allowed():
    sys = example53()
    assert (sys.n, sys.m) == (1, 2)


def test_validate_cost():
    assert not np.any(validate_cost(None, 2))
    with pytest.raises(StructureViolation):
        validate_cost([[1, 2], [0, 1]], 2)
    with pytest.raises(InvalidInput):
        validate_cost(np.eye(3), 2)


def test_controllability():
    assert is_controllable(mechanical(1, 1, 1))
    sys = validate(J51, np.diag([1.0, 0.0]), np.eye(2), np.zeros((2, 1)))
    assert not is_controllable(sys)
    K = controllability_matrix(mechanical(1, 1, 1))
    assert np.allclose(K, [[1, -1], [0, 1]])


def test_heat_model_is_not_controllable():
    # boundary nodes are decoupled from the input (zero rows in R, J = 0)
    assert not is_controllable(heat1d(5))
    assert not is_controllable(heat1d(100))


def test_energy_balance_constant_equilibrium():
    sys = mechanical(1, 1, 1)
    t = np.linspace(0, 1, 11)
    x = np.zeros((11, 2))
    u = np.zeros((11, 1))
    assert energy_balance_residual(sys, t, x, u) == 0.0


def test_energy_balance_closed_form_example():
    # optimal pair of the damped oscillator with d = 1, x0 = (1, 0)
    sys = mechanical(1, 1, 1)
    t = np.linspace(0, 1, 10**4)
    x = np.stack([np.ones_like(t), t], axis=1)
    u = (t + 1)[:, None]
    assert energy_balance_residual(sys, t, x, u) <= 1e-6


def test_energy_balance_detects_non_solutions():
    sys = mechanical(1, 1, 1)
    rng = np.random.default_rng(7)
    t = np.linspace(0, 1, 50)
    x = rng.standard_normal((50, 2))
    u = rng.standard_normal((50, 1))
    # separately coded integral of the supply minus dissipation
    y = x[:, 0]
    integrand = y * u[:, 0] - x[:, 0] ** 2
    integral = np.sum((integrand[1:] + integrand[:-1]) / 2 * np.diff(t))
    expected = abs(0.5 * x[-1] @ x[-1] - 0.5 * x[0] @ x[0] - integral)
    assert energy_balance_residual(sys, t, x, u) == pytest.approx(expected, rel=1e-12)
    assert expected > 1e-3


def test_energy_balance_needs_two_points():
    sys = mechanical(1, 1, 1)
    with pytest.raises(InvalidInput):
        energy_balance_residual(sys, [0.0], np.zeros((1, 2)), np.zeros((1, 1)))


def test_objective_value():
    sys = mechanical(1, 1, 1)
    t = np.linspace(0, 1, 1001)
    x = np.stack([np.ones_like(t), t], axis=1)
    u = (t + 1)[:, None]
    # one half of the integral of d * x_1^2 with x_1 = 1
    assert objective_value(sys, None, t, x, u) == pytest.approx(0.5, abs=1e-12)
    assert objective_value(sys, None, t, 0 * x, 0 * u) == 0.0


def test_objective_rejects_complex_control_for_real_system():
    sys = mechanical(1, 1, 1)
    t = np.linspace(0, 1, 5)
    with pytest.raises(InvalidInput):
        objective_value(sys, None, t, np.zeros((5, 2)), 1j * np.ones((5, 1)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_objective_is_nonnegative(seed):
    rng = np.random.default_rng(seed)
    sys, S = random_system(rng)
    t = np.sort(rng.uniform(0, 2, 20))
    x = rng.standard_normal((20, sys.n)) + 1j * rng.standard_normal((20, sys.n)) * (not sys.is_real)
    u = rng.standard_normal((20, sys.m)) + 1j * rng.standard_normal((20, sys.m)) * (not sys.is_real)
    assert objective_value(sys, S, t, x, u) >= -1e-9
