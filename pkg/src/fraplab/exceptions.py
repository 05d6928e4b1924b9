"""Exception hierarchy shared by all fraplab modules."""


class FraplabError(Exception):
    """Base class for all package errors."""


class DomainError(FraplabError):
    """An argument lies outside the mathematical domain of an operation."""


class PoleError(DomainError):
    """Evaluation requested at a pole (e.g. Gamma at a non-positive integer)."""


class ConvergenceError(FraplabError):
    """An iterative process (series, fixed point) failed to converge.

    Carries optional diagnostics in ``history``.
    """

    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history


class QuadratureError(FraplabError):
    """A quadrature could not certify its tolerance (tail bound, contour clip)."""

    def __init__(self, msg, bound=None):
        super().__init__(msg)
        self.bound = bound


class SummabilityError(QuadratureError):
    """Block-norm series of a convolution kernel could not be certified finite."""

    def __init__(self, msg, partial_sums=None):
        super().__init__(msg)
        self.partial_sums = partial_sums


class SingularOperatorError(FraplabError):
    """A resolvent or regularizer solve hit a (numerically) singular matrix."""

    def __init__(self, msg, lam=None):
        super().__init__(msg)
        self.lam = lam


class ConfigError(FraplabError):
    """A scenario configuration failed validation.

    ``field`` holds a dotted path to the offending entry when known.
    """

    def __init__(self, msg, field=None):
        super().__init__(msg)
        self.field = field
