"""Exception types shared across the laboratory."""


class ShearLabError(Exception):
    """Base class for all shearlab errors."""


class ValidationError(ShearLabError):
    """A parameter field is out of range or an exact constraint is violated."""


class ScheduleError(ShearLabError):
    """The cascade schedule cannot be built (e.g. it does not fit before t=1)."""


class DegenerateFieldError(ShearLabError):
    """A velocity field was requested with no cascade stages."""


class SingularTimeError(ShearLabError):
    """The velocity field was evaluated at the singular time t=1."""


class ResolutionError(ShearLabError):
    """A grid or quadrature cannot resolve the finest mollification collar."""


class ContractViolation(ShearLabError):
    """An operation was called outside its contract (bad slot, negative kappa, ...)."""
