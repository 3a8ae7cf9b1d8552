"""Optimal control of linear port-Hamiltonian systems with minimal energy supply."""

from .errors import *  # noqa: F401,F403
from .linalg import Subspace, drazin, expm, kernel, rank
from .models import example52, example53, heat1d, mechanical
from .pencil import RegularityReport, Verdict, build_pencil, full_report, kronecker_index
from .regularize import RegularizationResult, rank_minimal_S
from .solver import build_drazin_data, flow_at, solve_bvp, solve_ivp
from .system import PHSystem, validate

__version__ = "0.1.0"
