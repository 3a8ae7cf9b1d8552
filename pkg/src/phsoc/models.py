"""Reference port-Hamiltonian systems used in tests, demos and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, StructureViolation
from .linalg import as_matrix
from .system import PHSystem, validate


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: dict = field(default_factory=dict)

    KINDS = ("mechanical", "heat1d", "example52", "example53")

    def build(self) -> PHSystem:
        if self.kind == "mechanical":
            return mechanical(**self.params)
        if self.kind == "heat1d":
            return heat1d(**self.params)
        if self.kind == "example52":
            return example52()
        if self.kind == "example53":
            return example53()
        raise InvalidInput(f"unknown model kind {self.kind!r}")


def _require_pd(M, name, strict=True):
    lam = np.linalg.eigvalsh((M + M.conj().T) / 2).min()
    herm = np.abs(M - M.conj().T).max()
    bad = []
    if herm > 1e-12 * (1 + np.abs(M).max()):
        bad.append((f"{name} not Hermitian", float(herm)))
    if strict and lam <= 0:
        bad.append((f"{name} not positive definite", float(-lam)))
    if not strict and lam < -1e-12 * (1 + np.abs(M).max()):
        bad.append((f"{name} not positive semidefinite", float(-lam)))
    if bad:
        raise StructureViolation(bad)


def mechanical(M=1.0, D=1.0, K=1.0) -> PHSystem:
    """Damped mass-spring system M q'' + D q' + K q = u in momentum/position form.

    State (p, q) with p = M q'; J = [[0, -I], [I, 0]], R = diag(D, 0),
    Q = diag(M^-1, K), B = [I; 0]. Scalars are accepted for l = 1.
    """
    M, D, K = (as_matrix(np.atleast_2d(X), name) for X, name in ((M, "M"), (D, "D"), (K, "K")))
    ell = M.shape[0]
    if any(X.shape != (ell, ell) for X in (M, D, K)):
        raise InvalidInput("M, D and K must be square with equal size")
    _require_pd(M, "M")
    _require_pd(K, "K")
    _require_pd(D, "D", strict=False)
    I = np.eye(ell)
    Z = np.zeros((ell, ell))
    J = np.block([[Z, -I], [I, Z]])
    R = np.block([[D, Z], [Z, Z]])
    Q = np.block([[np.linalg.inv(M), Z], [Z, K]])
    B = np.vstack([I, Z])
    return validate(J, R, Q, B)


def heat1d(n: int, kappa: float = 1.0, unit_scaling: bool = False) -> PHSystem:
    """Finite-difference heat equation on [0, 1] with n nodes and control at node 2.

    R is the second-difference matrix on the interior nodes, padded with
    zero first/last rows and columns and scaled by kappa/h^2 with
    h = 1/(n-1) (``unit_scaling`` keeps the bare integer pattern).
    """
    if int(n) != n or n < 3:
        raise InvalidInput("heat1d needs n >= 3 nodes")
    if not kappa > 0:
        raise InvalidInput("kappa must be positive")
    n = int(n)
    inner = n - 2
    T = 2 * np.eye(inner) - np.eye(inner, k=1) - np.eye(inner, k=-1)
    R = np.zeros((n, n))
    R[1:-1, 1:-1] = T
    if not unit_scaling:
        h = 1.0 / (n - 1)
        R *= kappa / h**2
    B = np.zeros((n, 1))
    B[1, 0] = 1.0
    return validate(np.zeros((n, n)), R, np.eye(n), B)


def example52() -> PHSystem:
    """Two-state complex system with a rank-one dissipation."""
    J = [[1j, 0], [0, 0]]
    R = [[0, 0], [0, 1]]
    Q = [[1, 1j], [-1j, 1]]
    B = [[1], [0]]
    return validate(J, R, Q, B)


def example53() -> PHSystem:
    """Lossless scalar oscillator driven by two inputs; singular for S = 0."""
    return validate([[1j]], [[0]], [[1]], [[1, 1j]])


def necessary_not_sufficient() -> PHSystem:
    """The kernel intersection condition holds but the pencil at S = 0 is singular."""
    return validate([[0, -1], [1, 0]], np.diag([1.0, 0.0]), np.eye(2), np.eye(2))


def sufficient_not_necessary() -> PHSystem:
    """Regular at S = 0 although B ker S meets ker RQ."""
    return validate([[0, 1], [-1, 0]], np.diag([0.0, 1.0]), np.eye(2), [[1], [0]])
