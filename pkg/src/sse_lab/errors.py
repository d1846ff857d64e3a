"""Exception and warning types shared across the package."""


class NumericFailure(RuntimeError):
    """A numerical routine produced non-finite or out-of-tolerance results."""


class GridMismatchError(ValueError):
    """Two time grids that must coincide exactly do not."""


class ConfigurationWarning(UserWarning):
    """A physically questionable but not forbidden configuration."""


class DomainWarning(UserWarning):
    """A closed-form expression evaluated outside its guaranteed domain."""
