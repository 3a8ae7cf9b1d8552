import numpy as np
import pytest
import scipy.integrate

from corpus import corpus
from phsoc.errors import (
    InadmissibleInitialValue,
    InvalidInput,
    NoOptimalTrajectory,
    SingularPencil,
    SpectrumClash,
    UncontrollableWarning,
)
from phsoc.linalg import expm
from phsoc.models import example52, example53, heat1d, mechanical
from phsoc.pencil import build_pencil, full_report
from phsoc.solver import (
    boundary_map,
    build_drazin_data,
    flow_at,
    mu_independence_check,
    solve_bvp,
    solve_ivp,
)
from phsoc.system import validate


def _oscillator_closed_forms(d, t):
    """Reduced matrices of the damped oscillator (l = 1, M = K = 1) at mu = d."""
    S_d = -(d**3) / (2 * d**2 + 1)
    N = np.array([[0, 0, 0, 0], [0, d**2, 0, 0], [d**2, -d, 0, 0], [d, -1, 0, d**2]]) / d**3
    ND = np.array([[0, 0, 0, 0], [0, d**2, 0, 0], [0, -d, 0, 0], [d, 1, 0, d**2]]) / d
    H = np.array([[0, 0, 0, 0], [0, d, 0, 0], [0, -1, 0, 0], [1, -t, 0, d]]) / d
    M = np.array([[2 * d**3 + d, -2 * d**2 - 1, -(d**3), d**2]]) / d**3
    return S_d, N, ND, H, M


@pytest.mark.parametrize("d", [0.5, 1.0, 2.0])
def test_damped_oscillator_closed_forms(d):
    dd = build_drazin_data(mechanical(1, d, 1), None, d)
    t = 0.7
    S_d, N, ND, H, M = _oscillator_closed_forms(d, t)
    assert dd.S_mu[0, 0] == pytest.approx(S_d, abs=1e-12)
    assert np.allclose(dd.N_mu, N, atol=1e-10)
    assert np.allclose(dd.N_drazin.drazin, ND, atol=1e-10)
    assert np.allclose(flow_at(dd, t, 0.0).H_projected, H, atol=1e-10)
    assert np.allclose(dd.M_mu, M, atol=1e-10)
    # feedback row (1/d^4) [d^3, -d^4, 0, d^4]
    assert np.allclose(dd.feedback, [[1 / d, -1, 0, 1]], atol=1e-10)


@pytest.mark.parametrize("d", [0.5, 1.0, 2.0])
def test_damped_oscillator_bvp_end_to_end(d):
    dd = build_drazin_data(mechanical(1, d, 1), None, d)
    t0, t1 = 0.5, 1.5
    x0 = np.array([1.0, -0.3])
    x1 = np.array([x0[0], (t1 - t0) * x0[0] + x0[1]])
    sol = solve_bvp(dd, x0, x1, t0, t1, grid=201)
    assert sol.path == "A"
    assert np.allclose(sol.lambda0, [0, -d * x0[0]], atol=1e-10)
    tau = sol.t - t0
    assert np.allclose(sol.x[:, 0], x0[0], atol=1e-10)
    assert np.allclose(sol.x[:, 1], tau * x0[0] + x0[1], atol=1e-10)
    assert np.allclose(sol.u[:, 0], (tau + d) * x0[0] + x0[1], atol=1e-10)
    with pytest.raises(NoOptimalTrajectory):
        solve_bvp(dd, x0, x1 + np.array([0.1, 0.0]), t0, t1)


def test_reduced_blocks_equal_blocks_of_shifted_pencil():
    # independent route: (mu E - A)^{-1} E restricted to the (lambda, x) columns
    cases = [(mechanical(1, 1, 1), None, 1.0), (example53(), np.eye(2), 2j), (example52(), None, 1.0)]
    for sys, S, mu in cases:
        dd = build_drazin_data(sys, S, mu)
        p = build_pencil(sys, S)
        Eh = np.linalg.solve(mu * p.E - p.A, p.E)
        n = sys.n
        assert np.allclose(Eh[: 2 * n, : 2 * n], dd.N_mu, atol=1e-12)
        assert np.allclose(Eh[2 * n :, : 2 * n], dd.M_mu, atol=1e-12)
        assert np.allclose(Eh[:, 2 * n :], 0)


def test_lossless_oscillator_with_identity_weight():
    sys = example53()
    dd = build_drazin_data(sys, np.eye(2), 2j)
    assert np.allclose(dd.N_mu, [[-1j, 0], [2, -1j]], atol=1e-10)
    assert np.allclose(dd.M_mu, [[1j, 0], [1, 0]], atol=1e-10)
    # hand integration: lambda' = i lambda, x' = i x - 2 lambda
    for t in (0.0, 0.4, 2.0):
        H = np.exp(1j * t) * np.array([[1, 0], [-2 * t, 1]])
        assert np.allclose(flow_at(dd, t, 0.0).H, H, atol=1e-10)
    lam0, x0 = np.array([0.3 - 0.1j]), np.array([1.0 + 0.5j])
    sol = solve_ivp(dd, lam0, x0, np.linspace(0, 1, 101))
    assert np.allclose(sol.lam[:, 0], np.exp(1j * sol.t) * lam0[0])
    assert np.allclose(sol.u, np.stack([-sol.lam[:, 0], 1j * sol.lam[:, 0]], axis=1))


def test_lossless_oscillator_boundary_problem_is_always_solvable():
    dd = build_drazin_data(example53(), np.eye(2), 2j)
    T = 1.3
    for x1 in (np.exp(1j * T) * np.array([1.0]), np.array([2.0 - 1j])):
        sol = solve_bvp(dd, [1.0], x1, 0.0, T, grid=101)
        assert np.allclose(sol.x[-1], x1, atol=1e-10)
        expected = (1.0 - np.exp(-1j * T) * x1[0]) / (2 * T)
        assert sol.lambda0[0] == pytest.approx(expected, abs=1e-10)


def test_flow_is_identity_at_initial_time():
    dd = build_drazin_data(example52())
    fb = flow_at(dd, 3.0, 3.0)
    n = dd.n
    assert np.allclose(fb.E1, np.eye(n)) and np.allclose(fb.E4, np.eye(n))
    assert np.allclose(fb.E2, 0) and np.allclose(fb.E3, 0)


def test_solve_ivp_damped_oscillator():
    dd = build_drazin_data(mechanical(1, 1, 1), None, 1.0)
    t = np.linspace(0, 1, 1001)
    sol = solve_ivp(dd, [0, -1], [1, 0], t)
    assert np.allclose(sol.x, np.stack([np.ones_like(t), t], axis=1), atol=1e-12)
    assert np.allclose(sol.u[:, 0], t + 1, atol=1e-12)
    assert sol.dae_residual <= 1e-6
    assert sol.energy_residual() <= 1e-6


def test_solve_ivp_zero_data_and_inadmissible_data():
    dd = build_drazin_data(mechanical(1, 1, 1), None, 1.0)
    sol = solve_ivp(dd, [0, 0], [0, 0], np.linspace(0, 1, 11))
    assert not np.any(sol.x) and not np.any(sol.u)
    with pytest.raises(InadmissibleInitialValue) as exc:
        solve_ivp(dd, [1, 0], [1, 0], np.linspace(0, 1, 11))
    assert exc.value.residual > 0.5
    with pytest.raises(InvalidInput):
        solve_ivp(dd, [0, 0], [0, 0], [1.0, 0.0])


def test_solve_bvp_argument_checks():
    dd = build_drazin_data(mechanical(1, 1, 1), None, 1.0)
    with pytest.raises(InvalidInput):
        solve_bvp(dd, [1, 0], [1, 0], 1.0, 1.0)
    with pytest.raises(InvalidInput):
        solve_bvp(dd, [1], [1, 0], 0.0, 1.0)


def test_least_squares_path_on_uncontrollable_heat_model():
    sys = heat1d(4, kappa=0.05)
    with pytest.warns(UncontrollableWarning):
        dd = build_drazin_data(sys)
    n = sys.n
    z = dd.admissible.basis @ np.random.default_rng(0).standard_normal(dd.admissible.dim)
    x0 = z[n:]
    x1 = solve_ivp(dd, z[:n], x0, np.linspace(0, 1, 11)).x[-1]
    # the boundary nodes cannot move: any target changing them is infeasible
    with pytest.raises(NoOptimalTrajectory):
        solve_bvp(dd, x0, x1 + np.array([1.0, 0, 0, 0]), 0.0, 1.0)
    sol = solve_bvp(dd, x0, x1, 0.0, 1.0, grid=1001)
    assert sol.path == "B"
    assert sol.nonuniqueness_dim >= 1
    assert np.allclose(sol.x[-1], x1, atol=1e-8)
    assert sol.dae_residual <= 1e-6


def test_singular_pencil_is_refused():
    with pytest.raises(SingularPencil):
        build_drazin_data(example53())


def test_shift_on_spectrum_is_refused():
    with pytest.raises(SpectrumClash):
        build_drazin_data(example53(), np.eye(2), 1j)


def test_mu_independence_examples():
    assert mu_independence_check(example53(), np.eye(2), 2j, 3j)
    assert mu_independence_check(mechanical(1, 1, 1), None, 1.0, 2.0)
    dd = build_drazin_data(mechanical(1, 1, 1), None, 2.0)
    assert dd.admissible.dim == 2
    # admissible vectors have the form (0, -d z, z, zeta)
    assert dd.admissible.distance([0, -1, 1, 0]) < 1e-10
    assert dd.admissible.distance([0, 0, 0, 1]) < 1e-10


def test_shifted_pencil_coefficients_commute():
    for sys, S in corpus(40, seed=2):
        if not full_report(sys, S).regular:
            continue
        dd = build_drazin_data(sys, S)
        p = build_pencil(sys, S)
        K = dd.mu * p.E - p.A
        Eh = np.linalg.solve(K, p.E)
        Ah = np.linalg.solve(K, p.A)
        bound = 1e-10 * np.linalg.norm(Eh, 2) * np.linalg.norm(Ah, 2)
        assert np.linalg.norm(Eh @ Ah - Ah @ Eh, 2) <= max(bound, 1e-12)


def test_semigroup_property_on_admissible_set():
    dd = build_drazin_data(example52())
    P = dd.N_drazin.projector
    t0, t1, t2 = 0.2, 0.7, 1.5
    lhs = flow_at(dd, t2, t0).H @ P
    rhs = flow_at(dd, t2 - t1 + t0, t0).H @ flow_at(dd, t1, t0).H @ P
    assert np.linalg.norm(lhs - rhs, 2) <= 1e-8


def test_feedback_form_matches_trajectory_control():
    dd = build_drazin_data(example52())
    x0 = np.array([1.0, 1j])
    x1 = boundary_map(dd, 1.0) @ x0
    sol = solve_bvp(dd, x0, x1, 0.0, 1.0, grid=51)
    assert np.abs(sol.feedback_control(sol.t) - sol.u).max() <= 1e-10
    assert sol.dae_residual <= 1e-6


def test_boundary_map_of_damped_oscillator():
    dd = build_drazin_data(mechanical(1, 1, 1), None, 1.0)
    assert np.allclose(boundary_map(dd, 2.0, 0.5), [[1, 0], [1.5, 1]], atol=1e-10)


def test_uncontrollable_system_warns():
    sys = validate([[0, 0], [0, 0]], np.eye(2), np.eye(2), [[1], [0]])
    with pytest.warns(UncontrollableWarning):
        build_drazin_data(sys, [[1.0]])


def _ode_oracle(sys, S, lam0, x0, t):
    """Integrate lambda' = -A^H lambda - QRQ x, x' = A x - B S^{-1} B^H lambda."""
    A, n = sys.A, sys.n
    G = sys.B @ np.linalg.solve(S, sys.B.conj().T)
    F = np.block([[-A.conj().T, -sys.QRQ], [-G, A]])

    def rhs(_, z):
        return F @ z

    z0 = np.concatenate([lam0, x0]).astype(complex)
    out = scipy.integrate.solve_ivp(rhs, (t[0], t[-1]), z0, t_eval=t, method="DOP853", rtol=1e-12, atol=1e-13)
    return out.y.T[:, :n], out.y.T[:, n:]


def test_trajectories_agree_with_ode_integrator():
    rng = np.random.default_rng(4)
    checked = 0
    for sys, S in corpus(60, seed=8, s_zero=False):
        if np.linalg.matrix_rank(S) < sys.m or np.linalg.norm(sys.A, 2) > 5:
            continue
        S = S + np.eye(sys.m)
        dd = build_drazin_data(sys, S)
        x0 = rng.standard_normal(sys.n)
        x1 = rng.standard_normal(sys.n)
        try:
            sol = solve_bvp(dd, x0, x1, 0.0, 1.0, grid=201)
        except NoOptimalTrajectory:
            continue
        lam, x = _ode_oracle(sys, dd.S, sol.lambda0, x0, sol.t)
        assert np.abs(x - sol.x).max() <= 1e-6
        assert np.abs(lam - sol.lam).max() <= 1e-6
        checked += 1
    assert checked >= 5


def test_matrix_exponential_flow_matches_generator():
    dd = build_drazin_data(example52())
    assert np.allclose(flow_at(dd, 0.5).H, expm(0.5 * dd.generator))
