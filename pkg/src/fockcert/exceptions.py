"""Exception types raised across the package."""


class FockCertError(Exception):
    """Base class for all package errors."""


class DomainError(FockCertError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateHeraldError(FockCertError):
    """The herald outcome has probability exactly zero, so no state can be normalized."""


class TruncationError(FockCertError):
    """A series or distribution truncation could not meet its error budget."""


class InsufficientSamplesError(FockCertError):
    """A simulated run would contain fewer samples than the significance floor."""

    def __init__(self, n_samples, floor):
        self.n_samples = n_samples
        self.floor = floor
        super().__init__(f"{n_samples} samples per run is below the significance floor of {floor}")


class ThresholdCurveError(FockCertError):
    """A threshold curve file is missing, malformed, or violates its invariants."""
