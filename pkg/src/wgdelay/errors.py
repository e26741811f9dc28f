"""Exception hierarchy shared by all modules."""


class WgDelayError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(WgDelayError, ValueError):
    """Tensor extents or operator dimensions do not match."""


class ContractViolation(WgDelayError, ValueError):
    """An input violates a documented precondition (e.g. non-Hermitian generator)."""


class InputError(WgDelayError, ValueError):
    """Malformed user input, such as an unnormalized local state."""


class NumericalError(WgDelayError, ArithmeticError):
    """A dense linear-algebra routine failed to converge."""


class LayoutError(WgDelayError, IndexError):
    """A requested photon bin or site lies outside the allocated chain."""


class ConfigurationError(WgDelayError, ValueError):
    """Model or run configuration cannot support the requested quantity."""


class UnsupportedSizeError(WgDelayError, NotImplementedError):
    """The operation is only defined for particular emitter numbers."""


class IntegrationError(WgDelayError, ArithmeticError):
    """The master-equation integrator could not advance."""
