"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A caller-supplied parameter is outside the operation's domain."""


class UnreachableError(RuntimeError):
    """Two cities that should be joined by a route are not."""


class InvariantViolation(AssertionError):
    """A property that must hold by construction failed.

    Raised by the invariant checks in :mod:`proxnet.chains`; seeing one means a
    defect in the builders, never bad luck.
    """


class WorkCapExceeded(RuntimeError):
    """An exhaustive search visited more nodes than its configured cap."""
