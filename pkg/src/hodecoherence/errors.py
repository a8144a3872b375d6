"""Exception and warning types raised across the package."""


class DecoherenceError(Exception):
    """Base class for numerical failures inside the library."""


class GridTooSmallError(DecoherenceError):
    pass


class RegimeError(DecoherenceError):
    """A formula was called outside the parameter regime it is valid for."""


class EndpointMismatchError(DecoherenceError):
    pass


class QuadratureError(DecoherenceError):
    pass


class StepSizeError(DecoherenceError):
    pass


class PositivityError(DecoherenceError):
    pass


class TruncationError(DecoherenceError):
    """Fock-space truncation is being reached during propagation."""


class DimensionError(DecoherenceError):
    pass


class NodalRegionError(DecoherenceError):
    pass


class TruncationWarning(UserWarning):
    pass


class FirstOrderValidityWarning(UserWarning):
    pass
