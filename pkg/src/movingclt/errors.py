class PreconditionError(ValueError):
    """An operation was called outside its domain (zero variance, bad window, ...)."""


class ModelSchemaError(ValueError):
    """A model or scenario description does not match the expected schema."""


class GenerationError(PreconditionError):
    """A covariance section could not be factorized, even after jitter."""
