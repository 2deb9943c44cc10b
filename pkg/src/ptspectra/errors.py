"""Exception hierarchy shared by all modules."""


class PTSpectraError(Exception):
    """Base class for every error raised by the package."""


class PotentialError(PTSpectraError, ValueError):
    pass


class DiscretizationError(PTSpectraError, ValueError):
    pass


class EigenError(PTSpectraError, RuntimeError):
    pass


class ContourError(PTSpectraError, ValueError):
    """Raised when a contour passes too close to the spectrum."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class HypothesisError(PTSpectraError, ValueError):
    """A theorem hypothesis was checked and found violated."""

    def __init__(self, violation, message):
        super().__init__(f"{violation}: {message}")
        self.violation = violation


class PerturbationError(PTSpectraError, ValueError):
    pass


class ConfigError(PTSpectraError, ValueError):
    pass
