"""Exception and warning types."""


class QPCocycleError(Exception):
    pass


class NonConvergence(QPCocycleError):
    """Projective iteration did not settle below tolerance within the cap."""

    def __init__(self, message, residual=None, theta=None):
        super().__init__(message)
        self.residual = residual
        self.theta = theta


class ConeViolation(NonConvergence):
    """A slope left (0, inf), or the unstable/stable ordering failed."""


class DomainError(QPCocycleError, ValueError):
    pass


class QuadratureNotConverged(QPCocycleError):
    pass


class WindowViolation(QPCocycleError, ValueError):
    pass


class BadBracket(QPCocycleError, ValueError):
    pass


class DegenerateFit(QPCocycleError, ValueError):
    pass


class ConfigError(QPCocycleError, ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class MultipleMinimaWarning(UserWarning):
    """Two separated grid minima of d are within 5% of the global minimum."""
