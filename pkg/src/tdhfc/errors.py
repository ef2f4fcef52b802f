"""Exception types shared across the package."""


class TdhfcError(Exception):
    """Base class for all package-specific errors."""


class ImagResidueError(TdhfcError):
    """Real coordinates of a supposedly Hermitian matrix carry a large imaginary part."""


class ParseError(TdhfcError):
    """Interchange or configuration file is structurally invalid."""


class InvariantViolationError(TdhfcError):
    """Ingested molecular data fails a validation check; the message names the check."""


class NearSingularOverlapError(TdhfcError):
    """Overlap matrix has an eigenvalue too small for a stable orthogonalization."""


class NoConvergenceError(TdhfcError):
    """Self-consistent field iteration exhausted its iteration budget."""


class InvariantBreachError(TdhfcError):
    """A propagation step broke a conservation law beyond 10x its tolerance.

    Usually a sign that the time step is too large for the system at hand.
    """

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


class NonFiniteObjectiveError(TdhfcError):
    """Objective or gradient evaluation returned NaN or infinity."""


class NoConvergedRunsError(TdhfcError):
    """Solution selection requires at least one converged run."""
