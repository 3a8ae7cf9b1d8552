"""Dense complex linear algebra with explicit rank tolerances.

Every structural decision in this package (kernels, intersections, Wong
sequences, Drazin indices) is a rank decision, so all helpers take a relative
tolerance ``tol`` and, where a product of matrices is ranked, a reference norm
that anchors the threshold to the scale of the original factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidInput, NumericalFailure

TOL_REL = 1e-10
TOL_ORTH = 1e-12


def as_matrix(M, name="matrix") -> np.ndarray:
    """Promote ``M`` to a 2-D complex array and reject NaN/Inf entries."""
    A = np.asarray(M, dtype=complex)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise InvalidInput(f"{name} must be two-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} has non-finite entries")
    return A


def norm2(M) -> float:
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


@dataclass(frozen=True)
class Subspace:
    """Subspace of C^ambient_dim stored through an orthonormal basis."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        if b.ndim != 2:
            raise InvalidInput("subspace basis must be a 2-D array")
        if b.shape[1] > b.shape[0]:
            raise InvalidInput("more basis vectors than ambient dimension")
        if b.shape[1]:
            err = np.abs(b.conj().T @ b - np.eye(b.shape[1])).max()
            if err > TOL_ORTH:
                raise InvalidInput(f"basis not orthonormal (error {err:.2e})")
        object.__setattr__(self, "basis", b)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((n, 0), dtype=complex))

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(np.eye(n, dtype=complex))

    @classmethod
    def span(cls, vectors, tol=TOL_REL, ref_norm=None) -> "Subspace":
        """Column space of ``vectors`` (rank-revealing SVD)."""
        return column_space(vectors, tol=tol, ref_norm=ref_norm)

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def complement_projector(self) -> np.ndarray:
        return np.eye(self.ambient_dim) - self.projector()

    def contains(self, other: "Subspace", tol=1e-9) -> bool:
        """True if ``other`` lies in this subspace up to ``tol``."""
        _check_ambient(self, other)
        if other.dim == 0:
            return True
        return norm2(self.complement_projector() @ other.basis) <= tol

    def distance(self, v) -> float:
        v = np.asarray(v, dtype=complex).reshape(-1)
        return float(np.linalg.norm(v - self.basis @ (self.basis.conj().T @ v)))

    def orthogonal_complement(self) -> "Subspace":
        return kernel(self.basis.conj().T, ref_norm=1.0) if self.dim else Subspace.full(self.ambient_dim)


def _check_ambient(U: Subspace, V: Subspace):
    if U.ambient_dim != V.ambient_dim:
        raise InvalidInput(f"ambient dimensions differ: {U.ambient_dim} vs {V.ambient_dim}")


def _threshold(s: np.ndarray, tol: float, ref_norm) -> float:
    smax = float(s[0]) if s.size else 0.0
    scale = smax if ref_norm is None else max(smax, float(ref_norm))
    if scale == 0.0:
        return tol
    return tol * scale


def rank_and_kernel(M, tol_rel: float = TOL_REL, ref_norm=None) -> tuple[int, Subspace]:
    """Numerical rank of ``M`` and an orthonormal basis of its null space.

    Singular values above ``tol_rel * sigma_max`` count towards the rank.
    ``ref_norm`` raises the threshold floor to ``tol_rel * ref_norm``; pass
    it when ``M`` is a product whose exact value may vanish.
    """
    if tol_rel <= 0:
        raise InvalidInput("tol_rel must be positive")
    A = as_matrix(M)
    rows, cols = A.shape
    if rows == 0 or cols == 0:
        return 0, Subspace.full(cols)
    # a tall matrix only needs the thin factorisation to expose the full V
    _, s, vh = np.linalg.svd(A, full_matrices=rows < cols)
    rank = int(np.sum(s > _threshold(s, tol_rel, ref_norm)))
    null = vh[rank:].conj().T
    return rank, Subspace(_reorthonormalize(null))


def rank(M, tol_rel: float = TOL_REL, ref_norm=None) -> int:
    A = as_matrix(M)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > _threshold(s, tol_rel, ref_norm)))


def kernel(M, tol_rel: float = TOL_REL, ref_norm=None) -> Subspace:
    return rank_and_kernel(M, tol_rel, ref_norm)[1]


def column_space(M, tol=TOL_REL, ref_norm=None) -> Subspace:
    A = as_matrix(M)
    rows, cols = A.shape
    if rows == 0 or cols == 0:
        return Subspace.zero(rows)
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > _threshold(s, tol, ref_norm)))
    return Subspace(_reorthonormalize(u[:, :r]))


def image(M, U: Subspace, tol=TOL_REL) -> Subspace:
    """M applied to the subspace U; threshold anchored at ``||M||``."""
    A = as_matrix(M)
    if A.shape[1] != U.ambient_dim:
        raise InvalidInput("matrix/subspace dimension mismatch")
    if U.dim == 0:
        return Subspace.zero(A.shape[0])
    return column_space(A @ U.basis, tol=tol, ref_norm=norm2(A))


def _reorthonormalize(B: np.ndarray) -> np.ndarray:
    if B.shape[1] == 0:
        return B.astype(complex)
    q, _ = np.linalg.qr(B)
    return q


def subspace_intersection(U: Subspace, V: Subspace, tol=TOL_REL) -> Subspace:
    """U ∩ V as the common kernel of the two complement projectors."""
    _check_ambient(U, V)
    n = U.ambient_dim
    if U.dim == 0 or V.dim == 0:
        return Subspace.zero(n)
    stacked = np.vstack([U.complement_projector(), V.complement_projector()])
    return kernel(stacked, tol, ref_norm=1.0)


def subspace_sum_dim(U: Subspace, V: Subspace, tol=TOL_REL) -> int:
    _check_ambient(U, V)
    return rank(np.hstack([U.basis, V.basis]), tol, ref_norm=1.0)


def preimage(M, W: Subspace, tol=TOL_REL) -> Subspace:
    """{v : M v ∈ W}, the kernel of (I - P_W) M."""
    A = as_matrix(M)
    if A.shape[0] != W.ambient_dim:
        raise InvalidInput(
            f"preimage: matrix has {A.shape[0]} rows but W lives in C^{W.ambient_dim}"
        )
    return kernel(W.complement_projector() @ A, tol, ref_norm=norm2(A))


def subspaces_equal(U: Subspace, V: Subspace, tol=1e-9) -> bool:
    """Equal dimension plus mutual containment within ``tol``."""
    _check_ambient(U, V)
    return U.dim == V.dim and U.contains(V, tol) and V.contains(U, tol)


@dataclass(frozen=True)
class DrazinResult:
    drazin: np.ndarray
    index: int
    projector: np.ndarray


def drazin(M, tol_rel: float = TOL_REL) -> DrazinResult:
    """Drazin inverse through index stabilisation and a truncated pseudoinverse.

    The index is the smallest k with rank(M^(k+1)) == rank(M^k), read off
    the chain of kernels ker(M^k) = M^-1 ker(M^(k-1)), and
    M^D = M^k (M^(2k+1))^+ M^k, where the pseudoinverse keeps exactly
    rank(M^k) singular values. If that misses the axiom tolerance, the
    inverse is rebuilt on the splitting range(M^k) + ker(M^k).
    """
    A = as_matrix(M, "M")
    n = A.shape[0]
    if A.shape[1] != n:
        raise InvalidInput("Drazin inverse needs a square matrix")
    if n == 0:
        return DrazinResult(A.copy(), 0, A.copy())

    # nested chains ker(M^k) and range(M^k); every rank decision is made on
    # a matrix of norm ||M||, which avoids the grading of explicit powers
    kernels, ranges = [Subspace.zero(n)], [Subspace.full(n)]
    nu = None
    for k in range(n + 1):
        kernels.append(preimage(A, kernels[-1], tol_rel))
        ranges.append(image(A, ranges[-1], tol_rel))
        if kernels[-1].dim == kernels[-2].dim:
            nu = k
            break
    if nu is None:  # pragma: no cover - the kernel chain is bounded by n
        raise NumericalFailure("index search did not stabilise")
    r = n - kernels[nu].dim
    if ranges[nu].dim != r:
        raise NumericalFailure(
            f"rank of M^{nu} is ambiguous: {r} from kernels, {ranges[nu].dim} from images"
        )

    powers = [np.eye(n, dtype=complex)]
    for _ in range(2 * nu + 1):
        powers.append(powers[-1] @ A)
    eps = 1e-9 * (1.0 + norm2(A)) ** (nu + 1)
    if nu == 0:
        try:
            MD = np.linalg.inv(A)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise NumericalFailure("rank test passed but inversion failed") from exc
        bad = _drazin_defects(A, MD, nu, powers, eps)
    else:
        MD = _drazin_by_formula(powers, nu, r)
        bad = _drazin_defects(A, MD, nu, powers, eps)
        if bad:
            # the 2nu+1 power squares the conditioning; retry on the
            # invariant splitting range(M^nu) + ker(M^nu)
            alt = _drazin_by_splitting(A, ranges[nu], kernels[nu])
            alt_bad = _drazin_defects(A, alt, nu, powers, eps)
            if not alt_bad:
                MD, bad = alt, alt_bad
    if bad:
        detail = ", ".join(f"{k}={v:.2e}" for k, v in bad.items())
        raise NumericalFailure(f"Drazin axioms violated beyond {eps:.2e}: {detail}")
    return DrazinResult(MD, nu, MD @ A)


def _drazin_by_formula(powers, nu, r):
    """M^nu (M^(2nu+1))^+ M^nu keeping the r leading singular values."""
    big = powers[2 * nu + 1]
    if r == 0:
        return np.zeros_like(big)
    u, s, vh = np.linalg.svd(big)
    if s[r - 1] == 0:
        return np.full_like(big, np.nan)
    return powers[nu] @ ((vh[:r].conj().T / s[:r]) @ u[:, :r].conj().T) @ powers[nu]


def _drazin_by_splitting(A, R: Subspace, K: Subspace):
    """T diag(C^-1, 0) T^-1 with T = [range(M^nu), ker(M^nu)]."""
    n, r = A.shape[0], R.dim
    T = np.hstack([R.basis, K.basis])
    try:
        Ti = np.linalg.inv(T)
        D = np.zeros((n, n), dtype=complex)
        if r:
            D[:r, :r] = np.linalg.inv((Ti @ A @ T)[:r, :r])
    except np.linalg.LinAlgError:
        return np.full((n, n), np.nan, dtype=complex)
    return T @ D @ Ti


def _drazin_defects(A, MD, nu, powers, eps):
    if not np.all(np.isfinite(MD)):
        return {"finite": np.inf}
    P = MD @ A
    residuals = {
        "commutation": norm2(MD @ A - A @ MD),
        "inner inverse": norm2(MD @ A @ MD - MD),
        "index": norm2(MD @ powers[nu] @ A - powers[nu]),
        "idempotence": norm2(P @ P - P),
    }
    return {k: v for k, v in residuals.items() if v > eps}


def expm(M) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade approximants)."""
    A = as_matrix(M, "M")
    if A.shape[0] != A.shape[1]:
        raise InvalidInput("expm needs a square matrix")
    with np.errstate(over="raise", invalid="raise"):
        try:
            X = scipy.linalg.expm(A)
        except FloatingPointError as exc:
            raise NumericalFailure("matrix exponential overflowed") from exc
    if not np.all(np.isfinite(X)):
        raise NumericalFailure("matrix exponential overflowed")
    return X


def is_hermitian_psd(M, tol: float = TOL_REL) -> bool:
    A = as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise InvalidInput("is_hermitian_psd needs a square matrix")
    scale = tol * (1.0 + norm2(A))
    if np.abs(A - A.conj().T).max(initial=0.0) > scale:
        return False
    if A.size == 0:
        return True
    return bool(np.linalg.eigvalsh((A + A.conj().T) / 2).min() >= -scale)
