import numpy as np
import pytest

from emodistill.providers import (
    SyntheticAttributeProvider,
    SyntheticCorpusSpec,
    SyntheticEmbeddingProvider,
    generate_corpus,
)


@pytest.fixture(scope="session")
def small_corpus():
    """3 speakers x 5 emotions x 4 utterances; enough for clustering tests."""
    return generate_corpus(SyntheticCorpusSpec(n_speakers=3, n_emotions=5, utterances_per_cell=4, seed=11))


@pytest.fixture(scope="session")
def small_embeddings(small_corpus):
    return SyntheticEmbeddingProvider().extract(small_corpus)


@pytest.fixture(scope="session")
def small_attributes(small_corpus):
    return SyntheticAttributeProvider().predict(small_corpus)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
