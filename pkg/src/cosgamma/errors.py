"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside a function's mathematical domain."""


class InputError(ValueError):
    """Malformed or non-finite user data."""


class FitError(RuntimeError):
    """The EM fitter could not make progress on the given data."""


class TooFewSamplesError(FitError):
    """Fewer samples than the fit requires."""


class SizeError(ValueError):
    """A requested simulation exceeds the configured sample cap."""


class AssignmentError(ValueError):
    """A one-to-one assignment is impossible (more queries than candidates)."""
