"""Rank-minimal cost perturbations that make a singular optimality pencil regular.

For a generic omega the subspace V = B^{-1} (JQ - i omega) ker RQ of the
input space has minimal dimension, and any Hermitian PSD S whose kernel is
the orthogonal complement of V regularizes the pencil with the least
possible rank. The orthogonal projector onto V is used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure
from .linalg import TOL_REL
from .pencil import (
    RegularityReport,
    _preimage_space,
    admissible_omegas,
    build_pencil,
    full_report,
    ker_RQ,
    regular_by_rank_criterion,
)
from .system import PHSystem


@dataclass
class RegularizationResult:
    S_min: np.ndarray
    rank: int
    omega_used: float | None
    V_dim: int
    certificate: RegularityReport
    scale: float = 1.0
    sampled_dims: dict = field(default_factory=dict)
    spot_check_passed: bool | None = None


def minimal_dim_omega(sys: PHSystem, omega_samples=None, tol=TOL_REL):
    """Return ``(omega, V, dims)`` with dim V minimal over the sampled omegas.

    ``dims`` maps every sampled omega to dim B^{-1}(JQ - i omega) ker RQ so a
    caller can see whether the grid was fine enough.
    """
    if omega_samples is None:
        omega_samples = admissible_omegas(sys, [sys.JQ])
    kR = ker_RQ(sys, tol)
    best = None
    dims = {}
    for w in omega_samples:
        V = _preimage_space(sys, w, tol, kR)
        dims[float(w)] = V.dim
        if best is None or V.dim < best[1].dim:
            best = (float(w), V)
    return best[0], best[1], dims


def _random_psd(rng, m, r, complex_field):
    G = rng.standard_normal((m, r))
    if complex_field:
        G = G + 1j * rng.standard_normal((m, r))
    return G @ G.conj().T


def rank_minimal_S(sys: PHSystem, scale: float = 1.0, tol=TOL_REL, spot_checks: int = 10, seed=0):
    """Least-rank PSD cost weight that makes sE - A_S regular.

    Already regular pencils get S = 0. Otherwise S = scale * P_V; the
    regularity of the perturbed pencil is certified by :func:`full_report`
    and minimality is spot checked by ``spot_checks`` random PSD weights of
    smaller rank, all of which must leave the pencil singular.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    m = sys.m
    base = full_report(sys, None, tol)
    if base.regular:
        return RegularizationResult(np.zeros((m, m), dtype=complex), 0, None, 0, base, scale)

    omega, V, dims = minimal_dim_omega(sys, tol=tol)
    S_min = scale * V.projector()
    cert = full_report(sys, S_min, tol)
    if not cert.regular:
        raise NumericalFailure(
            f"projector onto V (dim {V.dim}) failed to regularize the pencil; enlarge the omega grid"
        )

    rng = np.random.default_rng(seed)
    passed = True
    if V.dim > 0:
        for _ in range(spot_checks):
            r = int(rng.integers(0, V.dim))
            S_hat = _random_psd(rng, m, r, not sys.is_real)
            if regular_by_rank_criterion(build_pencil(sys, S_hat), tol=tol)[0]:
                passed = False
                break
    return RegularizationResult(S_min, V.dim, omega, V.dim, cert, scale, dims, passed)

