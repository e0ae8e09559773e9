"""Exception hierarchy shared by the solver, kernels and oracles."""


class PollingError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PollingError, ValueError):
    """A point lies outside the closed unit polydisc."""


class DegenerateRoots(PollingError):
    """The visit quadratic has a (numerically) double root."""


class PoleOnGrid(PollingError):
    """A kernel denominator vanishes at an evaluation node."""


class RemovableSingularity(PoleOnGrid):
    """A cancelled factor coincides with the root inside the disc."""


class SeriesDivergence(PollingError):
    """A geometric series in the k-limited kernel does not converge."""


class NegativeMass(PollingError):
    """A projected coefficient tensor has significantly negative entries."""


class SingularUpdate(PollingError):
    """A Sherman-Morrison denominator is numerically zero."""


class IterationError(PollingError):
    """Base for fixed-point failures; carries the residual trace."""

    def __init__(self, message, trace=None, report=None):
        super().__init__(message)
        self.trace = list(trace or [])
        self.report = report


class DivergenceDetected(IterationError):
    pass


class MaxCyclesExceeded(IterationError):
    pass
