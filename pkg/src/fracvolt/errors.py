"""Exception hierarchy.

Two broad families matter for the CLI exit-code contract: configuration /
hypothesis violations (exit 1) and numerical failures (exit 2).
"""


class FracvoltError(Exception):
    """Base class for all library errors."""


class ValidationError(FracvoltError):
    """A model/configuration violates a hypothesis or invariant."""


class NegativeTime(ValidationError):
    """Kernel evaluated at t < 0."""


class InadmissibleParams(ValidationError):
    """CAR(2) parameters outside the admissible region."""


class EnvelopeViolation(ValidationError):
    """Sampled |x(t)| exceeds the declared decay envelope."""


class NotCentered(ValidationError):
    """Function has a nonzero mean under N(0,1); subtract it first."""


class DegenerateKernel(ValidationError):
    """eta is numerically zero; strict positivity required."""


class OutOfRange(ValidationError):
    """Hurst parameter outside the admissible interval for the operation."""


class TooFewSamples(ValidationError):
    """Not enough samples for the requested diagnostic."""


class NumericalError(FracvoltError):
    """A computation failed to reach its accuracy target."""


class NegativeEigenvalue(NumericalError):
    """Circulant embedding produced a negative spectral value."""


class ToleranceNotMet(NumericalError):
    """Adaptive quadrature exhausted its subdivision budget."""


class QuadratureUnstable(NumericalError):
    """Hermite coefficient quadrature beyond the stable truncation level."""


class NoSolution(NumericalError):
    """Moment inversion stalled; target outside the range of the map."""


class SingularJacobian(NumericalError):
    """Delta-method Jacobian is numerically singular."""
