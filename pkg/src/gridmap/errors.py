"""Exception types shared across the package."""


class GridmapError(Exception):
    """Base class for all errors raised by this package."""


class InputError(GridmapError):
    """Malformed, inconsistent, or out-of-range input data or options."""


class NumericalError(GridmapError):
    """A numerical routine failed or produced an infeasible result."""
