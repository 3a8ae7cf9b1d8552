"""Closed-form solutions of the optimality DAE through Drazin inverses.

With a shift mu the DAE E z' = A_S z, z = (lambda, x, u), reduces to
N z' = (mu N - I) z on the (lambda, x) part. The admissible initial values are
im(N^D N), the flow is exp(-N^D (I - mu N) t) and the control follows from
the feedback u = M N^D (lambda, x).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InadmissibleInitialValue,
    InvalidInput,
    MuSearchExhausted,
    NoOptimalTrajectory,
    NumericalFailure,
    SingularPencil,
    UncontrollableWarning,
)
from .linalg import TOL_REL, DrazinResult, Subspace, column_space, drazin, expm, norm2, rank, subspaces_equal
from .pencil import build_pencil, campbell_schur, mu_candidates, mu_is_admissible, regular_by_rank_criterion
from .system import PHSystem, energy_balance_residual, is_controllable, validate_cost

E3_TOL = 1e-8
ADMISSIBLE_TOL = 1e-8
BVP_TOL = 1e-8


def _swap(n):
    """[[0, -I], [I, 0]] acting on (lambda, x)."""
    I = np.eye(n)
    Z = np.zeros((n, n))
    return np.block([[Z, -I], [I, Z]])


@dataclass(frozen=True, eq=False)
class DrazinData:
    sys: PHSystem
    S: np.ndarray
    mu: complex
    E_mu: np.ndarray
    S_mu: np.ndarray
    N_mu: np.ndarray
    M_mu: np.ndarray
    N_drazin: DrazinResult
    admissible: Subspace

    @property
    def n(self) -> int:
        return self.sys.n

    @property
    def generator(self) -> np.ndarray:
        """-N^D (I - mu N), the generator of the (lambda, x) flow."""
        N = self.N_mu
        return -self.N_drazin.drazin @ (np.eye(N.shape[0]) - self.mu * N)

    @property
    def feedback(self) -> np.ndarray:
        """M N^D, mapping (lambda, x) to the optimal control."""
        return self.M_mu @ self.N_drazin.drazin

    def projector_residual(self, z) -> float:
        z = np.asarray(z, dtype=complex).reshape(-1)
        P = self.N_drazin.projector
        return float(np.linalg.norm(z - P @ z))


def _assemble(sys, S, mu, E_mu, S_mu, tol):
    n, m = sys.n, sys.m
    Bt = np.vstack([sys.B, np.zeros((n, m))])
    S_inv = np.linalg.inv(S_mu)
    Jb = _swap(n)
    N = (E_mu + E_mu @ Bt @ S_inv @ Bt.conj().T @ E_mu) @ Jb
    M = -S_inv @ Bt.conj().T @ E_mu @ Jb
    dz = drazin(N, tol)
    adm = column_space(dz.projector, tol, ref_norm=1.0)
    return DrazinData(sys, S, complex(mu), E_mu, S_mu, N, M, dz, adm)


def _try_mu(sys, S, mu, tol):
    E_mu, S_mu = campbell_schur(sys, S, mu)
    ref = norm2(S) + norm2(sys.B) ** 2 * norm2(E_mu)
    if rank(S_mu, tol, ref_norm=ref) < sys.m:
        return None
    return E_mu, S_mu


def build_drazin_data(sys: PHSystem, S=None, mu_hint=None, tol=TOL_REL) -> DrazinData:
    """Pick a usable shift and assemble the reduced matrices.

    A shift is usable when it avoids the spectra of (J-R)Q and -((J-R)Q)^H
    and mu E - A_S is invertible, which is equivalent to invertibility of
    S_mu. ``mu_hint`` overrides the deterministic candidate list.
    """
    S = validate_cost(S, sys.m)
    if not is_controllable(sys, tol):
        warnings.warn(
            "((J-R)Q, B) is not controllable; the cost multiplier is fixed to 1 regardless",
            UncontrollableWarning,
            stacklevel=2,
        )
    if mu_hint is not None:
        found = _try_mu(sys, S, complex(mu_hint), tol)
        if found is None:
            _raise_singular_or_exhausted(sys, S, tol, f"mu = {mu_hint} makes mu E - A_S singular")
        return _assemble(sys, S, complex(mu_hint), *found, tol)
    failure = None
    for mu in mu_candidates(sys):
        if not mu_is_admissible(sys, mu):
            continue
        found = _try_mu(sys, S, mu, tol)
        if found is None:
            continue
        try:
            return _assemble(sys, S, mu, *found, tol)
        except NumericalFailure as exc:
            # badly conditioned N_mu at this shift; a later one may do
            failure = exc
    if failure is not None:
        raise failure
    _raise_singular_or_exhausted(sys, S, tol, "no candidate shift makes mu E - A_S invertible")


def _raise_singular_or_exhausted(sys, S, tol, message):
    if not regular_by_rank_criterion(build_pencil(sys, S), tol=tol)[0]:
        raise SingularPencil("the optimality pencil is singular")
    raise MuSearchExhausted(message)


@dataclass(frozen=True)
class FlowBlocks:
    """Blocks of H(t) = exp(generator (t - t0)) in the (lambda, x) splitting.

    ``E1..E4`` belong to H itself, ``P1..P4`` to the projected flow
    H(t) N^D N which acts on admissible initial values.
    """

    t: float
    E1: np.ndarray
    E2: np.ndarray
    E3: np.ndarray
    E4: np.ndarray
    H: np.ndarray
    H_projected: np.ndarray

    @property
    def projected_blocks(self):
        n = self.E1.shape[0]
        P = self.H_projected
        return P[:n, :n], P[:n, n:], P[n:, :n], P[n:, n:]


def flow_at(dd: DrazinData, t: float, t0: float = 0.0) -> FlowBlocks:
    n = dd.n
    H = expm(dd.generator * (t - t0))
    Hp = H @ dd.N_drazin.projector
    return FlowBlocks(float(t), H[:n, :n], H[:n, n:], H[n:, :n], H[n:, n:], H, Hp)


@dataclass
class BVPSolution:
    """Optimal (or initial-value) trajectory of the optimality DAE.

    ``path`` is ``"A"`` when the lambda block of the projected flow was
    invertible at t1, ``"B"`` when the least-squares route was needed and
    ``"ivp"`` for :func:`solve_ivp`.
    """

    dd: DrazinData
    lambda0: np.ndarray
    x0: np.ndarray
    t0: float
    t1: float
    path: str
    residual: float = 0.0
    nonuniqueness_dim: int = 0
    t: np.ndarray | None = None
    lam: np.ndarray | None = None
    x: np.ndarray | None = None
    u: np.ndarray | None = None
    dae_residual: float | None = None
    notes: list = field(default_factory=list)

    @property
    def z0(self) -> np.ndarray:
        return np.concatenate([self.lambda0, self.x0])

    def sample(self, t):
        """(lambda, x, u) at times ``t``; arrays of shape (len(t), .)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        n = self.dd.n
        G = self.dd.generator
        z0 = self.dd.N_drazin.projector @ self.z0
        Z = np.array([expm(G * (tk - self.t0)) @ z0 for tk in t])
        U = Z @ self.dd.feedback.T
        return Z[:, :n], Z[:, n:], U

    @property
    def feedback_form(self) -> dict:
        """u(t) = K exp(G (t - t0)) z0 with K = M N^D."""
        return {"K": self.dd.feedback, "generator": self.dd.generator, "z0": self.z0, "t0": self.t0}

    def feedback_control(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        form = self.feedback_form
        return np.array([form["K"] @ expm(form["generator"] * (tk - self.t0)) @ form["z0"] for tk in t])

    def attach_grid(self, t):
        t = np.asarray(t, dtype=float).reshape(-1)
        self.t = t
        self.lam, self.x, self.u = self.sample(t)
        if t.size >= 3:
            self.dae_residual = dae_residual(self.dd, t, self.lam, self.x, self.u)
        return self

    def energy_residual(self) -> float:
        if self.t is None:
            raise InvalidInput("no sampled trajectory; call attach_grid first")
        return energy_balance_residual(self.dd.sys, self.t, self.x, self.u)


def _derivative_weights(t, width=5):
    """Finite-difference weights for d/dt on a sliding stencil of ``width`` points.

    Interior points use the centred stencil and the ends the nearest
    shifted one; weights solve the local Vandermonde system, so uneven
    grids are fine. Order of accuracy is width - 1.
    """
    N = t.size
    width = min(width, N)
    start = np.clip(np.arange(N) - width // 2, 0, N - width)
    idx = start[:, None] + np.arange(width)
    h = np.diff(t).mean()
    dt = (t[idx] - t[:, None]) / h
    V = dt[:, None, :] ** np.arange(width)[None, :, None]
    rhs = np.zeros((N, width))
    rhs[:, 1] = 1.0 / h
    return idx, np.linalg.solve(V, rhs[..., None])[..., 0]


def dae_residual(dd: DrazinData, t, lam, x, u) -> float:
    """Finite-difference defect of E w' - A_S w along samples w = (lambda, x, u).

    Derivatives use fourth-order five-point differences, centred in the
    interior; the defect is max_k |E w'_k - A_S w_k|_inf / (1 + max_k |w_k|_inf).
    """
    p = build_pencil(dd.sys, dd.S)
    t = np.asarray(t, dtype=float)
    W = np.hstack([lam, x, u])
    idx, wts = _derivative_weights(t)
    dW = np.einsum("kj,kjc->kc", wts, W[idx])
    defect = dW @ p.E.T - W @ p.A.T
    return float(np.abs(defect).max() / (1.0 + np.abs(W).max()))


def solve_ivp(dd: DrazinData, lambda0, x0, t_grid) -> BVPSolution:
    """Trajectory from an admissible (lambda0, x0) sampled on ``t_grid``."""
    n = dd.n
    lambda0 = np.asarray(lambda0, dtype=complex).reshape(-1)
    x0 = np.asarray(x0, dtype=complex).reshape(-1)
    if lambda0.size != n or x0.size != n:
        raise InvalidInput("initial values must have length n")
    t_grid = np.asarray(t_grid, dtype=float).reshape(-1)
    if t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise InvalidInput("t_grid must be strictly increasing with at least two points")
    z0 = np.concatenate([lambda0, x0])
    res = dd.projector_residual(z0)
    if res > ADMISSIBLE_TOL * (1.0 + np.linalg.norm(z0)):
        raise InadmissibleInitialValue(res)
    sol = BVPSolution(dd, lambda0, x0, float(t_grid[0]), float(t_grid[-1]), "ivp", residual=res)
    return sol.attach_grid(t_grid)


def solve_bvp(dd: DrazinData, x0, x1, t0: float, t1: float, grid=None) -> BVPSolution:
    """Optimal trajectory steering x0 at t0 to x1 at t1.

    ``grid`` is an optional number of sample points or an explicit time grid
    on which the trajectory is evaluated and checked.
    """
    n = dd.n
    x0 = np.asarray(x0, dtype=complex).reshape(-1)
    x1 = np.asarray(x1, dtype=complex).reshape(-1)
    if x0.size != n or x1.size != n:
        raise InvalidInput("boundary values must have length n")
    if not t1 > t0:
        raise InvalidInput("need t1 > t0")

    fb = flow_at(dd, t1, t0)
    _, _, P3, P4 = fb.projected_blocks
    rhs = x1 - P4 @ x0
    s = np.linalg.svd(P3, compute_uv=False)
    scale = 1.0 + np.linalg.norm(x1)
    notes = []
    if s.size and s[-1] > E3_TOL * max(s[0], 0.0) and s[-1] > 0:
        path = "A"
        lambda0 = np.linalg.solve(P3, rhs)
        z0 = np.concatenate([lambda0, x0])
        residual = dd.projector_residual(z0)
        if residual > ADMISSIBLE_TOL * (1.0 + np.linalg.norm(z0)):
            raise NoOptimalTrajectory(residual)
        kdim = 0
    else:
        path = "B"
        IP = np.eye(2 * n) - dd.N_drazin.projector
        lhs = np.vstack([IP[:, :n], P3])
        b = np.concatenate([-IP[:, n:] @ x0, rhs])
        lambda0, *_ = np.linalg.lstsq(lhs, b, rcond=None)
        residual = float(np.linalg.norm(lhs @ lambda0 - b))
        if residual > BVP_TOL * scale:
            raise NoOptimalTrajectory(residual)
        kdim = n - rank(lhs, TOL_REL, ref_norm=1.0)
        notes.append("lambda block of the flow is singular; solved by least squares")
        if kdim:
            notes.append(f"initial costates form an affine family of dimension {kdim}; minimum norm returned")
    sol = BVPSolution(dd, lambda0, x0, float(t0), float(t1), path, residual, kdim, notes=notes)
    if grid is not None:
        t = np.linspace(t0, t1, int(grid)) if np.isscalar(grid) else np.asarray(grid, dtype=float)
        sol.attach_grid(t)
    return sol


def mu_independence_check(sys: PHSystem, S, mu1, mu2, tol=1e-8) -> bool:
    """Admissible sets computed with two shifts coincide."""
    a = build_drazin_data(sys, S, mu1)
    b = build_drazin_data(sys, S, mu2)
    return subspaces_equal(a.admissible, b.admissible, tol)


def boundary_map(dd: DrazinData, t1: float, t0: float = 0.0) -> np.ndarray:
    """Matrix Phi with x(t1) = Phi x(t0) for every solution of the DAE.

    Defined when the admissible set is the graph of a map x0 -> lambda0,
    i.e. has dimension n and an invertible x-block.
    """
    n = dd.n
    V = dd.admissible.basis
    if V.shape[1] != n:
        raise InvalidInput(f"admissible set has dimension {V.shape[1]}, not n = {n}")
    Vx = V[n:]
    if rank(Vx, TOL_REL) < n:
        raise InvalidInput("initial states do not determine the initial costate")
    Hx = flow_at(dd, t1, t0).H_projected[n:] @ V
    return Hx @ np.linalg.inv(Vx)
