"""Exception types shared across the package."""


class HandFitError(Exception):
    """Base class for all handfit errors."""


class ContractError(HandFitError, ValueError):
    """An argument violates an operation's contract (bad shape, domain, or count)."""


class ModelLoadError(HandFitError):
    """Model constants are malformed (bad file, cyclic parent table, invalid indices)."""


class InitError(HandFitError):
    """Fit initialization is impossible (e.g. too few confident detections)."""


class FeatureUnavailable(HandFitError):
    """An optional model feature (e.g. palm-center weights) is missing."""
