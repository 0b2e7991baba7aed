"""Exception types shared across the engine."""


class ConvShrinkError(Exception):
    """Base class for all engine errors."""


class SpecValidationError(ConvShrinkError):
    """A descriptor (network, device, catalog, trace, config) violates its invariants."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InvalidOperatorError(ConvShrinkError):
    """A compression operator cannot be applied at the requested layer."""


class MalformedEncodingError(ConvShrinkError):
    """A plan encoding does not satisfy the encoding invariants."""


class ProfileIncompleteError(ConvShrinkError):
    """An accuracy profile lacks an entry (and declares no default) for a queried pair."""


class SearchSpaceTooLargeError(ConvShrinkError):
    """Exhaustive enumeration would exceed the configured cap."""


class NoFeasibleCandidateError(ConvShrinkError):
    """A selection step was handed an empty candidate front."""
