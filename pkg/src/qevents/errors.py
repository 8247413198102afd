"""Exception hierarchy shared by all qevents modules."""


class QEventsError(Exception):
    """Base class for library errors."""


class DimensionMismatch(QEventsError, ValueError):
    pass


class UnitMismatch(QEventsError, ValueError):
    """Raised when natural-unit and SI-unit quantities are mixed."""


class PhysicallyDisallowed(QEventsError):
    """An event whose self-amplitude does not exceed the allowed-event threshold."""


class QuadratureFailure(QEventsError, RuntimeError):
    """The shell quadrature could not reach the requested accuracy within budget."""


class StabilityError(QEventsError, ValueError):
    pass


class AllCandidatesDisallowed(QEventsError):
    """Every candidate in a history step has vanishing transition probability."""


class GridMismatch(QEventsError, ValueError):
    pass


class ConfigError(QEventsError, ValueError):
    pass
