import numpy as np
import pytest

from phsoc.errors import InvalidInput, StructureViolation
from phsoc.linalg import kernel, subspaces_equal, Subspace
from phsoc.models import ModelSpec, example52, example53, heat1d, mechanical
from phsoc.pencil import build_pencil, full_report, sufficient_condition_kernel
from phsoc.regularize import rank_minimal_S


def test_mechanical_reproduces_damped_oscillator():
    sys = mechanical(1, 1, 1)
    assert np.allclose(sys.J, [[0, -1], [1, 0]])
    assert np.allclose(sys.R, np.diag([1, 0]))
    assert np.allclose(sys.Q, np.eye(2))
    assert np.allclose(sys.B, [[1], [0]])


def test_mechanical_rejects_indefinite_mass():
    with pytest.raises(StructureViolation):
        mechanical(-1, 1, 1)
    with pytest.raises(StructureViolation):
        mechanical(1, -1, 1)


def test_mechanical_two_degrees_of_freedom():
    rng = np.random.default_rng(0)
    mats = []
    for _ in range(3):
        G = rng.standard_normal((2, 2))
        mats.append(G @ G.T + np.eye(2))
    sys = mechanical(*mats)
    assert (sys.n, sys.m) == (4, 2)
    assert sufficient_condition_kernel(build_pencil(sys))


def test_heat_kernel_and_input():
    sys = heat1d(5)
    K = kernel(sys.R)
    assert subspaces_equal(K, Subspace(np.eye(5)[:, [0, 4]]))
    assert sufficient_condition_kernel(build_pencil(sys))
    r = full_report(sys)
    assert r.regular and r.kronecker_index == 3


def test_heat_minimal_size():
    sys = heat1d(3, kappa=2.0)
    h = 0.5
    assert sys.R[1, 1] == pytest.approx(2 * 2.0 / h**2)
    assert np.count_nonzero(sys.R) == 1
    assert heat1d(3, unit_scaling=True).R[1, 1] == 2


def test_heat_rejects_bad_parameters():
    with pytest.raises(InvalidInput):
        heat1d(2)
    with pytest.raises(InvalidInput):
        heat1d(5, kappa=0)


@pytest.mark.parametrize("n", [3, 4, 7, 12])
def test_heat_satisfies_sufficient_condition(n):
    assert sufficient_condition_kernel(build_pencil(heat1d(n)))


def test_complex_examples():
    assert full_report(example52()).regular
    assert not full_report(example53()).regular
    assert rank_minimal_S(example53()).rank == 2
    for eps in (1e-6, 1e-2, 1.0):
        assert full_report(example53(), eps * np.eye(2)).regular


def test_model_spec_dispatch():
    assert ModelSpec("heat1d", {"n": 4}).build().n == 4
    assert ModelSpec("example53").build().m == 2
    with pytest.raises(InvalidInput):
        ModelSpec("beam").build()
