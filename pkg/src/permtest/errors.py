"""Exception types raised by permtest."""


class PermTestError(Exception):
    """Base class for all permtest errors."""


class DegenerateNodes(PermTestError):
    """Two reference nodes coincide; the degenerate test path must be used."""


class InvalidPartition(PermTestError):
    pass


class InvalidShape(PermTestError):
    pass


class LengthMismatch(PermTestError, ValueError):
    pass


class NotAProbabilityVector(PermTestError, ValueError):
    pass


class EmptySample(PermTestError, ValueError):
    pass


class InfeasibleDistance(PermTestError):
    """The simplex cannot accommodate an alternative at the requested distance."""


class ConfigError(PermTestError, ValueError):
    pass
