class CorpusException(Exception):
    """Base exception for interaction corpus errors."""


class InteractionParseError(CorpusException):
    """Exception raised when an interaction line cannot be parsed."""

    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"Line {lineno}: {message}")


class EmptyCorpusError(CorpusException):
    """Exception raised when an interaction file holds no records."""


class DatasetBundleError(CorpusException):
    """Exception raised when a dataset bundle directory is missing or malformed."""


class PretrainException(Exception):
    """Base exception for aspect embedding pre-training."""


class EmptyTrainingCorpusError(PretrainException):
    """Exception raised when the token corpus is empty."""


class EmbeddingFormatError(PretrainException):
    """Exception raised when an embedding file cannot be parsed."""


class EmbeddingDimensionMismatch(PretrainException):
    """Exception raised when embedding dimension differs from the configured d_a."""


class MissingAspectEmbeddings(PretrainException):
    """Exception raised when vocabulary aspects have no vector."""

    def __init__(self, missing: list[str]):
        self.missing = missing
        preview = ", ".join(missing[:20])
        more = f" (+{len(missing) - 20} more)" if len(missing) > 20 else ""
        super().__init__(f"Missing embeddings for {len(missing)} aspects: {preview}{more}")


class ModelException(Exception):
    """Base exception for model computation errors."""


class DegenerateNormError(ModelException):
    """Exception raised when a transformed aspect embedding has (near) zero norm."""


class UnknownEntityError(ModelException):
    """Exception raised for user or item ids the model was not trained on."""


class UnknownVariantError(ModelException):
    """Exception raised for variant tags missing from the registry."""


class CheckpointError(ModelException):
    """Exception raised when a checkpoint file is malformed or incompatible."""


class AttentionUnavailableError(ModelException):
    """Exception raised when a variant has no attention layer of the requested kind."""


class TrainingException(Exception):
    """Base exception for training errors."""


class NonFiniteGradientError(TrainingException):
    """Exception raised when loss or gradients contain NaN or infinity."""


class NegativeSamplingError(TrainingException):
    """Exception raised when a user has no unpurchased item to sample."""


class EvaluationException(Exception):
    """Base exception for evaluation errors."""


class EmptyTestSetError(EvaluationException):
    """Exception raised when no user has test items."""


# General application exceptions
class ConfigurationError(Exception):
    """Exception raised when configuration is invalid."""
