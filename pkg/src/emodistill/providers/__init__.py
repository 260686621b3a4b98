from emodistill.providers.corpus import (
    Corpus,
    SyntheticCorpusSpec,
    Utterance,
    generate_corpus,
    load_corpus,
    load_ground_truth,
    save_corpus,
)
from emodistill.providers.extractors import (
    AttributePoint,
    SpeakerEmbedding,
    SyntheticAttributeProvider,
    SyntheticEmbeddingProvider,
    read_attributes_csv,
    read_embeddings_csv,
    write_attributes_csv,
    write_embeddings_csv,
)

__all__ = [
    "AttributePoint",
    "Corpus",
    "SpeakerEmbedding",
    "SyntheticAttributeProvider",
    "SyntheticCorpusSpec",
    "SyntheticEmbeddingProvider",
    "Utterance",
    "generate_corpus",
    "load_corpus",
    "load_ground_truth",
    "read_attributes_csv",
    "read_embeddings_csv",
    "save_corpus",
    "write_attributes_csv",
    "write_embeddings_csv",
]
