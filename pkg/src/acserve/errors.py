"""Exception types shared across the package."""


class AcServeError(Exception):
    """Base class for all errors raised by this package."""


class EmptyInput(AcServeError):
    """Text produced no tokens where at least one is required."""


class DimensionMismatch(AcServeError):
    """Vector dimensions disagree (embedding vs. store, layer vs. input)."""


class UnknownEmbedderDim(DimensionMismatch):
    """The embedder's output dimension does not match the model input."""


class FormatVersionMismatch(AcServeError):
    """A persisted file declares an unsupported format version."""


class CorruptFile(AcServeError):
    """A persisted file is truncated, mislabeled, or fails its checksum."""


class DuplicateId(AcServeError):
    """An adapter id is already registered."""


class UnknownId(AcServeError):
    """No adapter registered under this id."""


class ShapeMismatch(AcServeError):
    """Adapter factor shapes disagree with each other or with the model."""


class LayerNotAdapted(AcServeError):
    """The adapter carries no delta for the requested layer."""


class InvalidPlan(AcServeError):
    """Mixing weights are malformed (wrong sum, negative, or non-finite)."""


class InvalidConfig(AcServeError):
    """Retrieval or service configuration violates an invariant."""


class EmptyPrediction(AcServeError):
    """A memorization score was requested for an empty prediction."""
