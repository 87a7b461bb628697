"""Exception hierarchy shared by every subpackage."""


class MaskGanError(Exception):
    """Base class for all errors raised by maskgan."""


class ContractError(MaskGanError, ValueError):
    """An operation was called with arguments that violate its preconditions."""


class AllocationError(MaskGanError, MemoryError):
    """Requested tensor exceeds the configured element budget."""


class NonFiniteError(MaskGanError, FloatingPointError):
    """A loss, gradient or function value became NaN or infinite.

    ``where`` names the offending term or coordinate; ``iteration`` is set by
    the trainer when the failure happens inside the training loop.
    """

    def __init__(self, message, where=None, iteration=None):
        super().__init__(message)
        self.where = where
        self.iteration = iteration


class NiftiError(MaskGanError):
    """Base class for NIfTI-1 decoding failures. ``field`` names the header field."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class BadMagicError(NiftiError):
    pass


class UnsupportedDatatypeError(NiftiError):
    pass


class TruncatedError(NiftiError):
    pass


class CheckpointError(MaskGanError):
    pass


class CheckpointMagicError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class ConfigError(MaskGanError):
    """Invalid configuration text. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataError(MaskGanError):
    """Dataset cannot be assembled (empty, inconsistent shapes, bad files)."""
