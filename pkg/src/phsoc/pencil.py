"""The optimality pencil sE - A_S and its regularity criteria.

All criteria answer the same question (is det(sE - A_S) a nonzero
polynomial?) through different routes: determinant sampling, the Schur
complement S_mu, three resolvent kernel conditions, a rank count, plus one
necessary and one sufficient kernel test. ``full_report`` runs all of them and
refuses to return when equivalent routes disagree.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import AllOmegaClash, InconsistentCriteria, InvalidInput, NoStabilization, SingularPencil, SpectrumClash
from .linalg import (
    TOL_REL,
    Subspace,
    column_space,
    image,
    kernel,
    norm2,
    preimage,
    rank,
    subspace_intersection,
    subspaces_equal,
)
from .system import PHSystem, is_controllable, validate_cost

DET_TOL = 1e-10
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class Verdict(str, enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    NOT_APPLICABLE = "not_applicable"

    @classmethod
    def of(cls, flag: bool) -> "Verdict":
        return cls.HOLDS if flag else cls.FAILS


@dataclass(frozen=True, eq=False)
class OptimalityPencil:
    E: np.ndarray
    A: np.ndarray
    sys: PHSystem
    S: np.ndarray

    @property
    def size(self) -> int:
        return self.E.shape[0]


def build_pencil(sys: PHSystem, S=None) -> OptimalityPencil:
    """Assemble the (2n+m) x (2n+m) pencil for the unknowns (lambda, x, u)."""
    n, m = sys.n, sys.m
    S = validate_cost(S, m)
    N = 2 * n + m
    E = np.zeros((N, N), dtype=complex)
    E[:n, n : 2 * n] = np.eye(n)
    E[n : 2 * n, :n] = -np.eye(n)
    A = np.zeros((N, N), dtype=complex)
    A[:n, n : 2 * n] = sys.A
    A[:n, 2 * n :] = sys.B
    A[n : 2 * n, :n] = sys.A.conj().T
    A[n : 2 * n, n : 2 * n] = sys.QRQ
    A[2 * n :, :n] = sys.B.conj().T
    A[2 * n :, 2 * n :] = S
    herm = np.abs(A - A.conj().T).max(initial=0.0)
    if herm > 1e-10 * (1 + norm2(A)):  # pragma: no cover - guaranteed by validation
        raise InvalidInput(f"A_S is not Hermitian (defect {herm:.2e})")
    return OptimalityPencil(E, A, sys, S)


# ---------------------------------------------------------------------------
# sampling grids


def omega_grid(sys: PHSystem, size: int | None = None, attempt: int = 0) -> np.ndarray:
    """Chebyshev-like frequency grid on [-(2+2||JQ||), 2+2||JQ||].

    The grid is shifted by an irrational offset that changes with ``attempt``
    so that retries dodge eigenvalues hit by the previous grid.
    """
    size = 4 * sys.n + 1 if size is None else int(size)
    if size < 1:
        raise InvalidInput("omega grid needs at least one point")
    width = 2.0 + 2.0 * norm2(sys.JQ)
    k = np.arange(size)
    nodes = np.cos(np.pi * (k + 0.5) / size)
    offset = width * _GOLDEN * (attempt + 1) / (3.0 * size)
    return width * nodes + offset


def _clashes(z: complex, spectrum: np.ndarray, scale: float) -> bool:
    return spectrum.size > 0 and np.min(np.abs(spectrum - z)) <= 1e-8 * scale


def admissible_omegas(sys: PHSystem, matrices, size=None, retries: int = 5):
    """Grid points with i*omega outside the spectra of all ``matrices``."""
    spectra = [np.linalg.eigvals(M) for M in matrices]
    scale = 1.0 + max((norm2(M) for M in matrices), default=0.0)
    for attempt in range(retries):
        good = [
            w
            for w in omega_grid(sys, size, attempt)
            if not any(_clashes(1j * w, sp, scale) for sp in spectra)
        ]
        if good:
            return np.array(good)
    raise AllOmegaClash("every sampled omega hits the spectrum")


def mu_candidates(sys: PHSystem, count: int = 51):
    """Deterministic shifts (1+||A||)(1+k/7) exp(i pi (2k+1)/17), k = 0..count-1."""
    r = 1.0 + norm2(sys.A)
    k = np.arange(count)
    return r * (1.0 + k / 7.0) * np.exp(1j * np.pi * (2 * k + 1) / 17.0)


def mu_is_admissible(sys: PHSystem, mu: complex) -> bool:
    scale = 1.0 + norm2(sys.A)
    spec = np.concatenate([np.linalg.eigvals(sys.A), np.linalg.eigvals(-sys.A.conj().T)])
    return not _clashes(mu, spec, scale)


# ---------------------------------------------------------------------------
# small kernel helpers


def _normalized(M, ref):
    return M / ref if ref > 0 else M


def common_kernel(blocks, m: int, tol=TOL_REL) -> Subspace:
    """Intersection of kernels of ``(matrix, reference_norm)`` blocks."""
    rows = [_normalized(np.asarray(M, dtype=complex), ref) for M, ref in blocks if np.size(M)]
    if not rows:
        return Subspace.full(m)
    return kernel(np.vstack(rows), tol, ref_norm=1.0)


def ker_S(p: OptimalityPencil, tol=TOL_REL) -> Subspace:
    return kernel(p.S, tol)


def ker_RQ(sys: PHSystem, tol=TOL_REL) -> Subspace:
    return kernel(sys.RQ, tol, ref_norm=norm2(sys.R) * norm2(sys.Q))


# ---------------------------------------------------------------------------
# criteria


def _equilibrate(M, sweeps=50):
    """Alternate row and column normalisation (a nonsingular diagonal equivalence)."""
    M = M.copy()
    for _ in range(sweeps):
        r = np.linalg.norm(M, axis=1)
        r[r == 0] = 1.0
        M /= r[:, None]
        c = np.linalg.norm(M, axis=0)
        c[c == 0] = 1.0
        M /= c[None, :]
    return M


def _hadamard_log_ratio(M) -> float:
    """log(|det M| / prod of row norms), -inf for exactly singular M."""
    row_norms = np.linalg.norm(M, axis=1)
    if np.any(row_norms == 0):
        return -np.inf
    sign, logdet = np.linalg.slogdet(M)
    if sign == 0:
        return -np.inf
    return float(logdet - np.sum(np.log(row_norms)))


def regular_by_det_sampling(p: OptimalityPencil, seed=0, tol=DET_TOL):
    """Evaluate det(mu E - A) at 2n+1 random points on each of two circles.

    Returns ``(regular, witness_mu)``. The first circle has radius
    r = 1 + ||A|| / max(||E||, 1), the second radius sqrt(r). Each matrix is
    diagonally equilibrated and its determinant divided by the product of
    its row norms (Hadamard's bound), so the test is scale free.
    """
    n = p.sys.n
    radius = 1.0 + norm2(p.A) / max(norm2(p.E), 1.0)
    rng = np.random.default_rng(seed)
    log_tol = np.log(tol)
    for r in (radius, np.sqrt(radius)):
        angles = 2 * np.pi * rng.random(2 * n + 1)
        for mu in r * np.exp(1j * angles):
            M = _equilibrate(mu * p.E - p.A)
            if _hadamard_log_ratio(M) > log_tol:
                return True, complex(mu)
    return False, None


def campbell_schur(sys: PHSystem, S, mu: complex):
    """E_mu and the Schur complement S_mu for the shift ``mu``.

    E_mu is the inverse of [[0, A - mu I], [A^H + mu I, QRQ]] with
    A = (J - R) Q; S_mu = S - [B^H 0] E_mu [B; 0].
    """
    if not mu_is_admissible(sys, mu):
        raise SpectrumClash(f"mu = {mu} lies on the spectrum of (J-R)Q or -((J-R)Q)^H")
    n, m = sys.n, sys.m
    I = np.eye(n)
    K = np.block([[np.zeros((n, n)), sys.A - mu * I], [sys.A.conj().T + mu * I, sys.QRQ]])
    E_mu = np.linalg.inv(K)
    Bt = np.vstack([sys.B, np.zeros((n, m))])
    S_mu = S - Bt.conj().T @ E_mu @ Bt
    return E_mu, S_mu


def _schur_invertible(sys, S, E_mu, S_mu, tol):
    ref = norm2(S) + norm2(sys.B) ** 2 * norm2(E_mu)
    return rank(S_mu, tol, ref_norm=ref) == sys.m


def regular_by_campbell_mu(p: OptimalityPencil, mu: complex, tol=TOL_REL) -> bool:
    """Regularity decided by invertibility of S_mu at one admissible shift."""
    E_mu, S_mu = campbell_schur(p.sys, p.S, mu)
    return _schur_invertible(p.sys, p.S, E_mu, S_mu, tol)


def campbell_search(p: OptimalityPencil, tol=TOL_REL, tries: int | None = None):
    """Try the deterministic shift list; returns ``(regular, witness_mu)``."""
    tries = p.size + 1 if tries is None else tries
    used = 0
    for mu in mu_candidates(p.sys):
        if not mu_is_admissible(p.sys, mu):
            continue
        used += 1
        if regular_by_campbell_mu(p, mu, tol):
            return True, complex(mu)
        if used >= tries:
            break
    return False, None


def _resolvent_kernel(p, M, omega, tol):
    """ker S ∩ ker RQ (M - i omega)^{-1} B."""
    sys = p.sys
    X = np.linalg.solve(M - 1j * omega * np.eye(sys.n), sys.B)
    K = sys.RQ @ X
    ref = norm2(sys.R) * norm2(sys.Q) * norm2(X)
    return common_kernel([(p.S, norm2(p.S)), (K, ref)], sys.m, tol)


def _preimage_space(sys: PHSystem, omega, tol, kerRQ=None) -> Subspace:
    """V = B^{-1} (JQ - i omega) ker RQ."""
    kerRQ = ker_RQ(sys, tol) if kerRQ is None else kerRQ
    shifted = sys.JQ - 1j * omega * np.eye(sys.n)
    W = image(shifted, kerRQ, tol)
    return preimage(sys.B, W, tol)


def resolvent_condition(p: OptimalityPencil, variant: str, omega: float, tol=TOL_REL) -> bool:
    """Evaluate one resolvent condition at a single admissible omega."""
    sys = p.sys
    if variant == "iii":
        return _resolvent_kernel(p, sys.A, omega, tol).dim == 0
    if variant == "iv":
        return _resolvent_kernel(p, sys.JQ, omega, tol).dim == 0
    if variant == "v":
        V = _preimage_space(sys, omega, tol)
        return subspace_intersection(ker_S(p, tol), V, tol).dim == 0
    raise InvalidInput(f"unknown resolvent variant {variant!r}")


def regular_by_resolvent(p: OptimalityPencil, variant: str = "iv", omegas=None, tol=TOL_REL):
    """Search the omega grid for a point where the kernel condition holds.

    ``variant`` is ``"iii"`` (full resolvent of (J-R)Q), ``"iv"`` (resolvent
    of JQ) or ``"v"`` (preimage form). Returns ``(regular, witness_omega)``.
    """
    sys = p.sys
    spectral = [sys.A] if variant == "iii" else [sys.JQ]
    if omegas is None:
        omegas = admissible_omegas(sys, spectral)
    else:
        spec = np.linalg.eigvals(spectral[0])
        scale = 1 + norm2(spectral[0])
        omegas = [w for w in omegas if not _clashes(1j * w, spec, scale)]
        if not omegas:
            raise AllOmegaClash("every supplied omega hits the spectrum")
    for w in omegas:
        if resolvent_condition(p, variant, w, tol):
            return True, float(w)
    return False, None


def rank_criterion_holds(p: OptimalityPencil, omega: float, tol=TOL_REL) -> bool:
    sys = p.sys
    n, m = sys.n, sys.m
    kS = ker_S(p, tol)
    kR = ker_RQ(sys, tol)
    target = m + n - ((m - kS.dim) + (n - kR.dim))
    shifted = sys.JQ - 1j * omega * np.eye(n)
    cols = [
        _normalized(sys.B @ kS.basis, norm2(sys.B)),
        _normalized(shifted @ kR.basis, norm2(shifted)),
    ]
    return rank(np.hstack(cols), tol, ref_norm=1.0) == target


def regular_by_rank_criterion(p: OptimalityPencil, omegas=None, tol=TOL_REL):
    """dim(B ker S + (JQ - i omega) ker RQ) == m + n - (rk S + rk RQ) on the grid."""
    if omegas is None:
        omegas = omega_grid(p.sys)
    for w in omegas:
        if rank_criterion_holds(p, w, tol):
            return True, float(w)
    return False, None


def necessary_condition_eq5(p: OptimalityPencil, tol=TOL_REL) -> bool:
    """ker S ∩ ker RQ(JQ)^r B over r = 0..n-1 is trivial.

    Necessary for regularity; for a single input (m = 1) also sufficient.
    """
    sys = p.sys
    blocks = [(p.S, norm2(p.S))]
    nRQ = norm2(sys.R) * norm2(sys.Q)
    nJQ = norm2(sys.J) * norm2(sys.Q)
    nB = norm2(sys.B)
    P = sys.B.copy()
    for r in range(sys.n):
        blocks.append((sys.RQ @ P, nRQ * nJQ**r * nB))
        P = sys.JQ @ P
    return common_kernel(blocks, sys.m, tol).dim == 0


def resolvent_grid_condition(p: OptimalityPencil, omegas, tol=TOL_REL) -> bool:
    """ker S ∩ ker RQ (JQ - i omega)^{-1} B over all given omega is trivial.

    With at least n distinct omega away from the spectrum this agrees with
    the necessary kernel condition.
    """
    sys = p.sys
    blocks = [(p.S, norm2(p.S))]
    for w in omegas:
        X = np.linalg.solve(sys.JQ - 1j * w * np.eye(sys.n), sys.B)
        blocks.append((sys.RQ @ X, norm2(sys.R) * norm2(sys.Q) * norm2(X)))
    return common_kernel(blocks, sys.m, tol).dim == 0


def sufficient_condition_kernel(p: OptimalityPencil, tol=TOL_REL) -> bool:
    """B ker S ∩ ker RQ = {0} = ker B ∩ ker S (implies regularity)."""
    sys = p.sys
    kS = ker_S(p, tol)
    if common_kernel([(sys.B, norm2(sys.B)), (p.S, norm2(p.S))], sys.m, tol).dim:
        return False
    BkS = image(sys.B, kS, tol)
    return subspace_intersection(BkS, ker_RQ(sys, tol), tol).dim == 0


def index_three_condition(sys: PHSystem, tol=TOL_REL) -> bool:
    """im B ∩ ker RQ = {0} = ker B."""
    if kernel(sys.B, tol).dim:
        return False
    imB = column_space(sys.B, tol)
    return subspace_intersection(imB, ker_RQ(sys, tol), tol).dim == 0


def wong_sequence(p: OptimalityPencil, tol=TOL_REL, eq_tol=1e-9):
    """Increasing Wong sequence W_0 = {0}, W_{k+1} = E^{-1}(A W_k) until it stalls."""
    W = [Subspace.zero(p.size)]
    for _ in range(p.size + 1):
        nxt = preimage(p.E, image(p.A, W[-1], tol), tol)
        W.append(nxt)
        if subspaces_equal(W[-2], W[-1], eq_tol):
            return W
    raise NoStabilization(f"Wong sequence did not stabilise within {p.size + 1} steps")


def kronecker_index(p: OptimalityPencil, tol=TOL_REL, assume_regular=False) -> int:
    """Index of a regular pencil: first k with W_k = W_{k+1}."""
    if not assume_regular and not regular_by_rank_criterion(p, tol=tol)[0]:
        raise SingularPencil("the Kronecker index is only defined for regular pencils")
    return len(wong_sequence(p, tol)) - 2


# ---------------------------------------------------------------------------
# report


EQUIVALENT = ("det_sampling", "campbell_ii", "resolvent_iii", "resolvent_iv", "preimage_v", "rank_criterion")


@dataclass
class RegularityReport:
    regular: bool
    witness_omega: float | None
    witness_mu: complex | None
    criteria: dict
    kronecker_index: int | None
    index_three_flag: bool
    notes: list = field(default_factory=list)
    witnesses: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        mu = self.witness_mu
        return {
            "regular": self.regular,
            "witness_omega": self.witness_omega,
            "witness_mu": None if mu is None else [mu.real, mu.imag],
            "criteria": {k: v.value for k, v in self.criteria.items()},
            "kronecker_index": self.kronecker_index,
            "index_three_flag": self.index_three_flag,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegularityReport":
        mu = d.get("witness_mu")
        return cls(
            regular=bool(d["regular"]),
            witness_omega=d.get("witness_omega"),
            witness_mu=None if mu is None else complex(mu[0], mu[1]),
            criteria={k: Verdict(v) for k, v in d["criteria"].items()},
            kronecker_index=d.get("kronecker_index"),
            index_three_flag=bool(d["index_three_flag"]),
            notes=list(d.get("notes", [])),
        )


def full_report(sys: PHSystem, S=None, tol=TOL_REL, omega_grid_size=None, seed=0, mu=None) -> RegularityReport:
    """Run every criterion and cross-check the equivalent ones.

    A user supplied shift ``mu`` is tried first for the Schur complement
    criterion and, if it certifies regularity, reported as the witness.
    """
    p = build_pencil(sys, S)
    omegas = omega_grid(sys, omega_grid_size)
    results = {}
    witnesses = {}

    results["det_sampling"], witnesses["det_sampling"] = regular_by_det_sampling(p, seed)
    if mu is not None and regular_by_campbell_mu(p, complex(mu), tol):
        results["campbell_ii"], witnesses["campbell_ii"] = True, complex(mu)
    else:
        results["campbell_ii"], witnesses["campbell_ii"] = campbell_search(p, tol)
    for variant, name in (("iii", "resolvent_iii"), ("iv", "resolvent_iv"), ("v", "preimage_v")):
        spectral = [sys.A] if variant == "iii" else [sys.JQ]
        try:
            grid = admissible_omegas(sys, spectral, omega_grid_size)
            results[name], witnesses[name] = regular_by_resolvent(p, variant, grid, tol)
        except AllOmegaClash:
            results[name], witnesses[name] = None, None
    results["rank_criterion"], witnesses["rank_criterion"] = regular_by_rank_criterion(p, omegas, tol)
    necessary = necessary_condition_eq5(p, tol)
    sufficient = sufficient_condition_kernel(p, tol)

    decided = {k: results[k] for k in EQUIVALENT if results[k] is not None}
    reference = "rank_criterion"
    regular = decided[reference]
    for name, verdict in decided.items():
        if verdict != regular:
            raise InconsistentCriteria(
                f"{name} says {'regular' if verdict else 'singular'} but {reference} "
                f"says {'regular' if regular else 'singular'}",
                pair=(name, reference),
                where={name: witnesses[name], reference: witnesses[reference]},
            )
    if sufficient and not regular:
        raise InconsistentCriteria("sufficient kernel condition holds for a singular pencil",
                                   pair=("sufficient_kernel", reference))
    if regular and not necessary:
        raise InconsistentCriteria("regular pencil violates the necessary kernel condition",
                                   pair=("necessary_eq5", reference))
    if sys.m == 1 and necessary != regular:
        raise InconsistentCriteria("single-input promotion of the necessary condition disagrees",
                                   pair=("necessary_eq5", reference))

    criteria = {
        k: Verdict.NOT_APPLICABLE if results[k] is None else Verdict.of(results[k]) for k in EQUIVALENT
    }
    criteria["necessary_eq5"] = Verdict.of(necessary)
    criteria["sufficient_kernel"] = Verdict.of(sufficient)

    notes = []
    if sufficient:
        notes.append("sufficient kernel condition holds: optimal controls are unique when they exist")
    if sys.m == 1:
        notes.append("single input: the necessary kernel condition is also sufficient")
    if not is_controllable(sys, tol):
        notes.append("((J-R)Q, B) is not controllable: normalising lambda_0 = 1 is not justified")
    if not regular:
        notes.append("pencil is singular: a rank-minimal cost regularisation can restore regularity")

    index = kronecker_index(p, tol, assume_regular=True) if regular else None
    S_zero = norm2(p.S) == 0.0
    flag = bool(regular and S_zero and index_three_condition(sys, tol))

    return RegularityReport(
        regular=regular,
        witness_omega=witnesses["resolvent_iv"] if regular else None,
        witness_mu=(complex(mu) if mu is not None and witnesses["campbell_ii"] == complex(mu)
                    else witnesses["det_sampling"]) if regular else None,
        criteria=criteria,
        kronecker_index=index,
        index_three_flag=flag,
        notes=notes,
        witnesses=witnesses,
    )
