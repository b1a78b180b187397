class FolnerLabError(Exception):
    pass


class DescriptorMismatch(FolnerLabError, ValueError):
    """An element or subset does not belong to the group it was used with."""


class BudgetExceeded(FolnerLabError):
    """A computation would exceed a configured resource cap."""

    def __init__(self, message, cap=None, required=None):
        super().__init__(message)
        self.cap = cap
        self.required = required


class SearchExhausted(FolnerLabError):
    """A bounded search (horizon, refinement, greedy construction) found nothing."""

    def __init__(self, message, last_index=None):
        super().__init__(message)
        self.last_index = last_index


class CertificateError(FolnerLabError):
    """A numerical certificate failed its tolerance check."""
