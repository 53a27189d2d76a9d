"""Error types raised by the toolkit.

Every error carries a machine code (printed by the CLI as ``ERROR <code>:``)
and the process exit code it maps to.
"""


class MG1Error(Exception):
    """Base class for all toolkit errors"""

    code: str = "MG1_ERROR"
    exit_code: int = 1

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# Input / precondition errors (exit code 2)

class InputError(MG1Error):
    exit_code = 2


class InvalidSpec(InputError):
    code = "INVALID_SPEC"


class PreconditionViolation(InputError):
    code = "PRECONDITION"


class NotStochastic(InputError):
    code = "NOT_STOCHASTIC"


class DimensionMismatch(InputError):
    code = "DIMENSION_MISMATCH"


class IndexOutOfDomain(InputError):
    code = "INDEX_OUT_OF_DOMAIN"


class NegativeArgument(InputError):
    code = "NEGATIVE_ARGUMENT"


class GammaTooSmall(InputError):
    code = "GAMMA_TOO_SMALL"


class GridUnderflow(InputError):
    code = "GRID_UNDERFLOW"


class CutoffTooSmall(InputError):
    code = "CUTOFF_TOO_SMALL"


class ToleranceUnreachable(InputError):
    code = "TOLERANCE_UNREACHABLE"


class ExponentMismatch(InputError):
    code = "EXPONENT_MISMATCH"


class NonNegativeDrift(InputError):
    code = "NON_NEGATIVE_DRIFT"


# Numerical failures (exit code 1)

class Reducible(MG1Error):
    code = "REDUCIBLE"


class SingularSystem(MG1Error):
    code = "SINGULAR_SYSTEM"


class NoConvergence(MG1Error):
    code = "NO_CONVERGENCE"


class CapTooSmall(MG1Error):
    code = "CAP_TOO_SMALL"


class ReferenceUnstable(MG1Error):
    code = "REFERENCE_UNSTABLE"
