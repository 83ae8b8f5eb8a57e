"""Exception hierarchy for blowuplab.

Every failure mode that callers are expected to handle gets its own class;
the CLI maps these to distinct exit codes.
"""


class BlowupLabError(Exception):
    """Base class for all package errors."""


class ConfigError(BlowupLabError):
    """Malformed configuration file or invalid parameter combination."""

    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class GridMismatchError(BlowupLabError):
    """Operands live on different grids or have incompatible shapes."""


class UnsupportedOrderError(BlowupLabError):
    """Requested order exceeds the supported cap."""


class DegenerateInputError(BlowupLabError):
    """Input makes the requested quantity ill-defined (e.g. zero denominator)."""


class AccuracyError(BlowupLabError):
    """A computation did not reach its required accuracy."""


class StiffnessError(BlowupLabError):
    """ODE integration step size underflow; carries the last accepted state."""

    def __init__(self, message, r=None, state=None):
        self.r = r
        self.state = state
        super().__init__(message)


class BisectionError(BlowupLabError):
    """Shooting bisection failed to converge or lost its bracket."""


class NonDecayingError(BlowupLabError):
    """Far-field fit requested for a profile that does not decay."""


class InwardIntegrationError(BlowupLabError):
    """Inward homogeneous solve blew up (growing-mode contamination)."""


class SolvabilityError(BlowupLabError):
    """Right-hand side violates the orthogonality required at a shifted kernel."""


class HierarchyError(BlowupLabError):
    """Corrector hierarchy produced a non-finite quantity at stage (i, j)."""

    def __init__(self, message, i=None, j=None):
        self.i = i
        self.j = j
        super().__init__(message)


class DomainError(BlowupLabError):
    """Parameter outside the validity region (e.g. b above its cap)."""


class OutOfBasinError(BlowupLabError):
    """Decomposition Newton iteration diverged: state too far from the family."""


class DecompositionError(BlowupLabError):
    """Singular Jacobian in the decomposition solve."""


class InstabilityError(BlowupLabError):
    """Time stepper lost positivity or an implicit solve failed."""

    def __init__(self, message, series=None):
        self.series = series
        super().__init__(message)


class InsufficientDecayError(BlowupLabError):
    """Run too short to reconstruct physical-time quantities."""


class MissingArtifactError(BlowupLabError):
    """An upstream output file required by this command does not exist."""
