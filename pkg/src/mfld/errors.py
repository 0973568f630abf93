"""Exception types shared across the toolkit."""


class MfldError(Exception):
    """Base class for all toolkit errors."""


class BadMagic(MfldError):
    """Binary layer file does not start with the expected magic bytes."""


class Truncated(MfldError):
    """Binary layer file payload is shorter than its header implies."""


class ManifestMismatch(MfldError):
    """Manifest and layer tensors disagree on example ids or counts."""


class TooFewManifolds(MfldError):
    """Fewer than two distinct label values were found."""


class NonBracketable(MfldError):
    """The separable fraction never crosses 1/2 over the searchable range."""

    def __init__(self, message, curve=None):
        super().__init__(message)
        self.curve = curve if curve is not None else []


class NoRecords(MfldError):
    """A report was requested for an empty record list."""
