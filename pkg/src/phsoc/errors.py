"""Exception hierarchy shared by all phsoc modules."""


class PhsocError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(PhsocError, ValueError):
    pass


class NumericalFailure(PhsocError, ArithmeticError):
    pass


class StructureViolation(InvalidInput):
    """A matrix violates a port-Hamiltonian structural requirement.

    ``violations`` is a list of ``(which, magnitude)`` pairs.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        text = "; ".join(f"{which} (magnitude {mag:.3g})" for which, mag in self.violations)
        super().__init__(f"structure violation: {text}")


class SpectrumClash(PhsocError):
    """The requested shift lies on (or too close to) a forbidden spectrum."""


class AllOmegaClash(SpectrumClash):
    pass


class MuSearchExhausted(PhsocError):
    pass


class SingularPencil(PhsocError):
    pass


class NoStabilization(NumericalFailure):
    pass


class InconsistentCriteria(NumericalFailure):
    def __init__(self, message, pair=None, where=None):
        self.pair = pair
        self.where = where
        super().__init__(message)


class InadmissibleInitialValue(PhsocError):
    def __init__(self, residual):
        self.residual = residual
        super().__init__(f"initial value not admissible (projector residual {residual:.3g})")


class NoOptimalTrajectory(PhsocError):
    def __init__(self, residual):
        self.residual = residual
        super().__init__(
            f"boundary pair not reachable along the singular arc (residual {residual:.3g})"
        )


class UncontrollableWarning(UserWarning):
    """((J-R)Q, B) is not controllable, so fixing the cost multiplier to 1 is unjustified."""
