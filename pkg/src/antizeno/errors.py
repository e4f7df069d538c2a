"""Exception and warning types shared across the package."""


class InputError(ValueError):
    """An argument is out of its documented domain (non-finite, wrong sign, ...)."""


class ConfigurationError(ValueError):
    """A grid, step size, or config file is inconsistent or incomplete."""


class UnsupportedModelError(ValueError):
    """The requested quantity does not exist for this model (e.g. divergent weight)."""


class FitDomainError(ValueError):
    """Survival data cannot be log-fitted (nonpositive probabilities)."""


class AccuracyError(RuntimeError):
    """A numerical routine could not reach the requested accuracy.

    Carries the best estimate obtained so far in ``best_estimate``.
    """

    def __init__(self, message: str, best_estimate: float | None = None):
        super().__init__(message)
        self.best_estimate = best_estimate


class InternalStateError(RuntimeError):
    """An internal bookkeeping invariant was violated; indicates a bug."""


class SupportCoverageWarning(UserWarning):
    """A grid or evaluation point misses a significant part of the spectrum."""


class ShortTimeValidityWarning(UserWarning):
    """The perturbative weight is too large for the short-time propagator."""
