"""Port-Hamiltonian quadruples (J, R, Q, B) and quantities derived from them."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidInput, StructureViolation
from .linalg import TOL_REL, as_matrix, column_space, norm2


def _skew_defect(J):
    return float(np.abs(J + J.conj().T).max(initial=0.0))


def _psd_defects(M):
    herm = float(np.abs(M - M.conj().T).max(initial=0.0))
    lam_min = float(np.linalg.eigvalsh((M + M.conj().T) / 2).min()) if M.size else 0.0
    return herm, lam_min


@dataclass(frozen=True, eq=False)
class PHSystem:
    """Linear port-Hamiltonian system  x' = (J - R) Q x + B u,  y = B^H Q x.

    Build instances through :func:`validate`; the constructor itself performs
    no structural checks.
    """

    J: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    B: np.ndarray

    @property
    def n(self) -> int:
        return self.J.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @cached_property
    def A(self) -> np.ndarray:
        """System matrix (J - R) Q."""
        return (self.J - self.R) @ self.Q

    @cached_property
    def JQ(self) -> np.ndarray:
        return self.J @ self.Q

    @cached_property
    def RQ(self) -> np.ndarray:
        return self.R @ self.Q

    @cached_property
    def QRQ(self) -> np.ndarray:
        return self.Q @ self.R @ self.Q

    @property
    def is_real(self) -> bool:
        return all(not np.any(M.imag) for M in (self.J, self.R, self.Q, self.B))


def validate(J, R, Q, B, tol: float = TOL_REL) -> PHSystem:
    """Check membership of (J, R, Q, B) in the port-Hamiltonian class.

    Raises :class:`StructureViolation` listing every violated invariant and
    its magnitude.
    """
    J = as_matrix(J, "J")
    R = as_matrix(R, "R")
    Q = as_matrix(Q, "Q")
    B = as_matrix(B, "B")
    n = J.shape[0]
    for name, M in (("J", J), ("R", R), ("Q", Q)):
        if M.shape != (n, n):
            raise InvalidInput(f"{name} has shape {M.shape}, expected {(n, n)}")
    if B.shape[0] != n:
        raise InvalidInput(f"B has {B.shape[0]} rows, expected {n}")

    violations = []
    skew = _skew_defect(J)
    if skew > tol * (1 + norm2(J)):
        violations.append(("J not skew-Hermitian", skew))
    for name, M in (("R", R), ("Q", Q)):
        herm, lam_min = _psd_defects(M)
        scale = tol * (1 + norm2(M))
        if herm > scale:
            violations.append((f"{name} not Hermitian", herm))
        if lam_min < -scale:
            violations.append((f"{name} not positive semidefinite", -lam_min))
    if violations:
        raise StructureViolation(violations)
    return PHSystem(J, R, Q, B)


def validate_cost(S, m: int, tol: float = TOL_REL) -> np.ndarray:
    """Return the cost weight S as a Hermitian PSD m x m array (None means 0)."""
    if S is None:
        return np.zeros((m, m), dtype=complex)
    S = as_matrix(S, "S")
    if S.shape != (m, m):
        raise InvalidInput(f"S has shape {S.shape}, expected {(m, m)}")
    herm, lam_min = _psd_defects(S)
    scale = tol * (1 + norm2(S))
    violations = []
    if herm > scale:
        violations.append(("S not Hermitian", herm))
    if lam_min < -scale:
        violations.append(("S not positive semidefinite", -lam_min))
    if violations:
        raise StructureViolation(violations)
    return S


def controllability_matrix(sys: PHSystem) -> np.ndarray:
    blocks = [sys.B]
    for _ in range(sys.n - 1):
        blocks.append(sys.A @ blocks[-1])
    return np.hstack(blocks)


def is_controllable(sys: PHSystem, tol: float = TOL_REL) -> bool:
    """Kalman rank test for the pair ((J - R) Q, B).

    The reachable subspace is grown with orthonormal bases instead of raw
    powers of A, which would overflow or swamp the rank threshold.
    """
    n = sys.n
    V = column_space(sys.B, tol)
    while V.dim < n:
        grown = column_space(np.hstack([V.basis, sys.A @ V.basis]), tol, ref_norm=max(1.0, norm2(sys.A)))
        if grown.dim == V.dim:
            break
        V = grown
    return V.dim == n


def _grid_arrays(t, x, u, sys):
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.size < 2:
        raise InvalidInput("need at least two grid points")
    x = np.asarray(x, dtype=complex).reshape(t.size, -1)
    u = np.asarray(u, dtype=complex).reshape(t.size, -1)
    if x.shape[1] != sys.n or u.shape[1] != sys.m:
        raise InvalidInput("trajectory dimensions do not match the system")
    return t, x, u


def energy_balance_residual(sys: PHSystem, t, x, u) -> float:
    """Defect of the energy balance along a sampled trajectory.

    ``t`` has shape (N,), ``x`` shape (N, n), ``u`` shape (N, m). The supply
    minus dissipation integral uses the composite trapezoid rule on ``t``.
    """
    t, x, u = _grid_arrays(t, x, u, sys)
    Q = sys.Q
    y = x @ (sys.B.conj().T @ Q).T
    supply = np.einsum("ij,ij->i", y.conj(), u).real
    dissipation = np.einsum("ij,jk,ik->i", x.conj(), sys.QRQ, x).real
    integral = np.trapezoid(supply - dissipation, t)
    h1 = 0.5 * np.real(x[-1].conj() @ Q @ x[-1])
    h0 = 0.5 * np.real(x[0].conj() @ Q @ x[0])
    return float(abs(h1 - h0 - integral))


def objective_value(sys: PHSystem, S, t, x, u) -> float:
    """1/2 * integral of x^H QRQ x + u^H S u by the trapezoid rule."""
    t, x, u = _grid_arrays(t, x, u, sys)
    S = validate_cost(S, sys.m)
    if sys.is_real and np.abs(u.imag).max() > 1e-8 * (1 + np.abs(u).max()):
        raise InvalidInput("complex-valued control supplied for a real system")
    integrand = (
        np.einsum("ij,jk,ik->i", x.conj(), sys.QRQ, x).real
        + np.einsum("ij,jk,ik->i", u.conj(), S, u).real
    )
    return float(0.5 * np.trapezoid(integrand, t))
