"""Exception hierarchy shared by all modules.

Every exception carries a short machine-friendly ``prefix`` so the command
line front end can report errors with a stable, greppable message.
"""


class GTError(Exception):
    prefix = "error"

    def __str__(self):
        return f"{self.prefix}: {super().__str__()}"


class InvalidSize(GTError, ValueError):
    prefix = "invalid-size"


class DimensionMismatch(GTError, ValueError):
    prefix = "dimension-mismatch"


class EmptyTransformList(GTError, ValueError):
    prefix = "empty-transform-list"


class StaleCache(GTError, ValueError):
    prefix = "stale-cache"


class ConfigError(GTError, ValueError):
    prefix = "config"


class EmptyImage(GTError, ValueError):
    prefix = "empty-image"


class NotDivisible(GTError, ValueError):
    prefix = "not-divisible"


class UnsupportedSize(GTError, ValueError):
    prefix = "unsupported-size"


class EmptyDataset(GTError, ValueError):
    prefix = "empty-dataset"


class TokenOutOfRange(GTError, ValueError):
    prefix = "token-out-of-range"


class LabelOutOfRange(GTError, ValueError):
    prefix = "label-out-of-range"


class EmptyBatch(GTError, ValueError):
    prefix = "empty-batch"


class EmptyHistory(GTError, ValueError):
    prefix = "empty-history"


class ShapeMismatch(GTError, ValueError):
    prefix = "shape-mismatch"


class ZeroVector(GTError, ValueError):
    prefix = "zero-vector"


class InvalidSpec(GTError, ValueError):
    prefix = "invalid-spec"


class MixedDimensions(GTError, ValueError):
    prefix = "mixed-dimensions"


class TooManyUnitaries(GTError, ValueError):
    prefix = "too-many-unitaries"


class PostselectionImpossible(GTError, ArithmeticError):
    prefix = "postselection-impossible"


class UnknownId(GTError, LookupError):
    prefix = "unknown-id"


class FormatError(GTError, ValueError):
    prefix = "format"
