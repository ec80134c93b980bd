"""Exception types raised across the package."""


class ParameterDomainError(ValueError):
    """A distribution parameter or probability lies outside its domain."""


class EmptyCaseError(ValueError):
    """A forecast case has no usable ensemble member."""


class SingularFitError(ValueError):
    """The regression design matrix is degenerate."""


class InsufficientDataError(RuntimeError):
    """A training window or archive holds too little data to proceed."""


class ArchiveFormatError(ValueError):
    """A CSV archive could not be parsed."""
