"""Cross-speaker emotion transfer at desk scale.

The pipeline has three stages: unsupervised emotion cluster matching over
speaker embeddings (pseudo-labels), self-distilled emotion embeddings trained
with cluster-driven multi-crop sampling and formant perturbation, and a small
non-autoregressive acoustic model conditioned on emotion + speaker embeddings
through a dual-conditioned transformer block.
"""

__version__ = "0.1.0"

from emodistill.errors import (
    ClusterError,
    ConfigError,
    CorpusError,
    GeometryError,
    LineageError,
    MissingInputError,
    ProviderError,
    TrainingError,
)

__all__ = [
    "ClusterError",
    "ConfigError",
    "CorpusError",
    "GeometryError",
    "LineageError",
    "MissingInputError",
    "ProviderError",
    "TrainingError",
    "__version__",
]
