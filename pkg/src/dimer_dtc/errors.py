"""Exception types shared across the package."""


class DimerDtcError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(DimerDtcError):
    """Operator dimensions are inconsistent or exceed the configured limit."""


class MemoryBudgetError(DimerDtcError):
    """A requested superoperator would exceed the memory budget."""

    def __init__(self, required_bytes: int, budget_bytes: int):
        self.required_bytes = int(required_bytes)
        self.budget_bytes = int(budget_bytes)
        super().__init__(
            f"superoperator needs ~{self.required_bytes} bytes, "
            f"budget is {self.budget_bytes} bytes"
        )


class SolverConvergenceError(DimerDtcError):
    """An iterative or direct solve did not reach the requested residual."""

    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message if residual is None
                         else f"{message} (residual {residual:.3e})")


class DegenerateSteadyStateError(DimerDtcError):
    """More than one eigenvalue sits at zero: the steady state is not unique
    at this parameter point (possible phase-transition point)."""


class StepSizeError(DimerDtcError):
    """Fixed-step integration drifted beyond tolerance; reduce dt."""


class BlowUpError(DimerDtcError):
    """A trajectory left the configured bounding box."""

    def __init__(self, time: float, magnitude: float):
        self.time = time
        self.magnitude = magnitude
        super().__init__(f"field magnitude {magnitude:.3e} at t={time:.6g} "
                         "exceeds the blow-up threshold")


class CutoffError(DimerDtcError):
    """A Fock cutoff is too small for the requested state."""


class PositivityError(DimerDtcError):
    """A density matrix has an eigenvalue below the allowed negativity slack."""


class ConfigError(DimerDtcError):
    """A run configuration failed validation."""
