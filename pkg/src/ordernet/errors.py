"""Exception types shared across the package.

Every error raised on purpose derives from OrdernetError so the command-line
front end can report it as a single diagnostic line and exit nonzero.
"""


class OrdernetError(Exception):
    """Base class for all errors this package raises deliberately."""


class ShapeError(OrdernetError):
    """Operands have incompatible shapes; the message names both."""


class MaskError(OrdernetError):
    """A candidate mask left nothing to choose from."""


class EmptyInputError(OrdernetError):
    """An operation received an empty sequence where at least one row is required."""


class IndexRangeError(OrdernetError):
    """An integer index fell outside its table or candidate range."""


class NumericError(OrdernetError):
    """A computation produced or received non-finite values."""


class InvalidOrderError(OrdernetError):
    """An order or target sequence violates its structural rules."""


class CorpusError(OrdernetError):
    """A corpus, vocabulary, or embedding file cannot be used as given."""


class FormatError(CorpusError):
    """A text artifact is malformed; the message carries the offending line."""


class NoiseSampleError(CorpusError):
    """No usable noise sentence could be drawn from the pool."""


class CheckpointError(OrdernetError):
    """A checkpoint file is missing, truncated, or inconsistent with the model."""


class ConfigError(OrdernetError):
    """A configuration file or flag combination is invalid."""
