"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class EulerSynthError(Exception):
    exit_code = 1
    error_class = "error"


class ValidationError(EulerSynthError, ValueError):
    exit_code = 2
    error_class = "validation"


class HypothesisViolation(EulerSynthError):
    """A mode fails the contraction hypothesis required for the guarantees."""

    exit_code = 3
    error_class = "hypothesis"

    def __init__(self, message, modes=()):
        super().__init__(message)
        self.modes = tuple(modes)


class InvarianceViolation(EulerSynthError):
    """A grid cell has no admissible mode (controlled Euler-invariance fails)."""

    exit_code = 4
    error_class = "invariance"

    def __init__(self, message, cells=()):
        super().__init__(message)
        self.cells = tuple(cells)


class NumericalDomainError(EulerSynthError, ArithmeticError):
    exit_code = 5
    error_class = "numerical-domain"


class OutOfDomainError(NumericalDomainError):
    """A state lies outside the domain box."""

    error_class = "out-of-domain"


class UnsupportedRegime(NumericalDomainError):
    """The requested bound has no closed form for this sign of the OSL constant."""

    error_class = "unsupported-regime"


class DegenerateSystem(NumericalDomainError):
    error_class = "degenerate-system"


class OracleFailure(NumericalDomainError):
    """The reference integrator could not reach the requested tolerance."""

    error_class = "oracle-failure"


class RefusedError(EulerSynthError):
    """Brute-force enumeration refused because the instance is too large."""

    exit_code = 2
    error_class = "refused"
