"""Exception taxonomy shared by all softcover modules."""


class SoftcoverError(Exception):
    """Base class for every error raised by this package."""


class MalformedInputError(SoftcoverError, ValueError):
    """Input data fails a structural check (shape, symmetry, positivity, trace)."""


class PreconditionError(SoftcoverError, ValueError):
    """Arguments are well formed but violate a documented precondition."""


class SupportError(SoftcoverError, ValueError):
    """An operator carries weight outside the support of its reference."""


class UnknownNameError(SoftcoverError, KeyError):
    """A name lookup (lemma id, mode, function name) did not match anything."""


class ResourceLimitError(SoftcoverError, RuntimeError):
    """The request exceeds a hard size or enumeration guard."""


class NumericalError(SoftcoverError, RuntimeError):
    """A numerical routine could not certify its own result."""
