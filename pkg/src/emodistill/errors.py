"""Exception hierarchy shared across the pipeline."""


class EmodistillError(Exception):
    """Base class for all package errors."""


class ConfigError(EmodistillError):
    """Invalid, unknown, or malformed configuration."""


class CorpusError(EmodistillError):
    """Invalid corpus spec or corrupted corpus artifact."""


class ProviderError(EmodistillError):
    """Extraction provider misuse (empty corpus, unknown utterance id)."""


class ClusterError(EmodistillError):
    """Clustering precondition violated (too few or degenerate points)."""


class GeometryError(EmodistillError):
    """Degenerate or non-finite geometric input."""


class MissingInputError(EmodistillError):
    """A required on-disk input does not exist."""


class LineageError(EmodistillError):
    """Artifacts produced under different configurations were mixed."""


class TrainingError(EmodistillError):
    """Trainer misuse: lock conflicts, bad resume state."""
