"""Extraction provider interfaces plus deterministic synthetic implementations.

Real deployments would plug a speaker-verification network and an emotional
attribute predictor in here; the synthetic providers emulate their output
geometry from the corpus generator's cell assignments so that everything
downstream can be exercised without pre-trained models.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from emodistill.errors import ProviderError
from emodistill.providers.corpus import Corpus, attribute_directions, embedding_offsets


@dataclass(frozen=True)
class SpeakerEmbedding:
    utterance_id: str
    vector: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.vector)):
            raise ProviderError(f"non-finite embedding for {self.utterance_id!r}")


@dataclass(frozen=True)
class AttributePoint:
    utterance_id: str
    arousal: float
    valence: float
    dominance: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ProviderError(f"non-finite attributes for {self.utterance_id!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.arousal, self.valence, self.dominance])


class EmbeddingProvider(Protocol):
    def extract(self, corpus: Corpus, ids: Iterable[str] | None = None) -> list[SpeakerEmbedding]:
        ...


class AttributeProvider(Protocol):
    def predict(self, corpus: Corpus, ids: Iterable[str] | None = None) -> list[AttributePoint]:
        ...


def _resolve_ids(corpus: Corpus, ids: Iterable[str] | None) -> list[str]:
    if len(corpus) == 0:
        raise ProviderError("cannot extract from an empty corpus")
    known = {utt.utterance_id for utt in corpus.utterances}
    if ids is None:
        return [utt.utterance_id for utt in corpus.utterances]
    ids = list(ids)
    for utt_id in ids:
        if utt_id not in known:
            raise ProviderError(f"unknown utterance id {utt_id!r}")
    return ids


class SyntheticEmbeddingProvider:
    """Speaker blob + per-emotion offset + isotropic noise.

    The noise is scaled so its expected vector norm equals ``noise_scale``
    times the minimum distance between per-emotion blob centers, keeping the
    blobs well separated at the default 0.1 ratio.
    """

    def __init__(self, seed: int | None = None):
        self.seed = seed

    def extract(self, corpus: Corpus, ids: Iterable[str] | None = None) -> list[SpeakerEmbedding]:
        ids = _resolve_ids(corpus, ids)
        spec = corpus.spec
        seed = spec.seed if self.seed is None else self.seed
        dim = spec.embed_dim
        offsets = embedding_offsets(spec.n_emotions, dim, spec.embed_separation, spec.seed)
        dists = [
            np.linalg.norm(offsets[i] - offsets[j])
            for i in range(spec.n_emotions)
            for j in range(i + 1, spec.n_emotions)
        ]
        sigma = spec.noise_scale * min(dists) / np.sqrt(dim)

        centers_rng = np.random.default_rng([spec.seed, 61])
        speakers = sorted({utt.speaker_id for utt in corpus.utterances})
        centers = {spk: centers_rng.normal(0.0, 3.0, dim) for spk in speakers}

        out = []
        index = {utt.utterance_id: i for i, utt in enumerate(corpus.utterances)}
        for utt_id in ids:
            speaker_id, emotion_id = corpus.ground_truth[utt_id]
            rng = np.random.default_rng([seed, 67, index[utt_id]])
            vec = centers[speaker_id] + offsets[emotion_id] + rng.normal(0.0, sigma, dim)
            out.append(SpeakerEmbedding(utterance_id=utt_id, vector=vec))
        return out


class SyntheticAttributeProvider:
    """Neutral at the attribute-space origin, other emotions at fixed directions."""

    def __init__(self, seed: int | None = None):
        self.seed = seed

    def sigma(self, corpus: Corpus) -> float:
        spec = corpus.spec
        dirs = attribute_directions(spec.n_emotions, spec.seed)
        dists = [
            np.linalg.norm(dirs[i] - dirs[j])
            for i in range(len(dirs))
            for j in range(i + 1, len(dirs))
        ]
        return spec.attr_noise_scale * min(dists) / np.sqrt(3.0)

    def predict(self, corpus: Corpus, ids: Iterable[str] | None = None) -> list[AttributePoint]:
        ids = _resolve_ids(corpus, ids)
        spec = corpus.spec
        seed = spec.seed if self.seed is None else self.seed
        dirs = attribute_directions(spec.n_emotions, spec.seed)
        sigma = self.sigma(corpus)
        index = {utt.utterance_id: i for i, utt in enumerate(corpus.utterances)}
        out = []
        for utt_id in ids:
            _, emotion_id = corpus.ground_truth[utt_id]
            rng = np.random.default_rng([seed, 71, index[utt_id]])
            a, v, d = dirs[emotion_id] + rng.normal(0.0, sigma, 3)
            out.append(
                AttributePoint(utterance_id=utt_id, arousal=float(a), valence=float(v), dominance=float(d))
            )
        return out


# ---------------------------------------------------------------------------
# CSV interchange


def write_embeddings_csv(path: str | Path, embeddings: list[SpeakerEmbedding]) -> None:
    if not embeddings:
        raise ProviderError("refusing to write an empty embedding table")
    dim = len(embeddings[0].vector)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance_id"] + [f"dim_{i}" for i in range(dim)])
        for emb in embeddings:
            if len(emb.vector) != dim:
                raise ProviderError("inconsistent embedding dimensions in one corpus")
            writer.writerow([emb.utterance_id] + [repr(float(v)) for v in emb.vector])


def read_embeddings_csv(path: str | Path) -> list[SpeakerEmbedding]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "utterance_id":
            raise ProviderError(f"{path}: not an embedding table")
        dim = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if len(row) != dim + 1:
                raise ProviderError(f"{path}: corrupted row at line {lineno}")
            try:
                vector = np.array([float(v) for v in row[1:]])
            except ValueError:
                raise ProviderError(f"{path}: corrupted row at line {lineno}")
            out.append(SpeakerEmbedding(utterance_id=row[0], vector=vector))
    return out


def write_attributes_csv(path: str | Path, points: list[AttributePoint]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance_id", "arousal", "valence", "dominance"])
        for pt in points:
            writer.writerow(
                [pt.utterance_id, repr(pt.arousal), repr(pt.valence), repr(pt.dominance)]
            )


def read_attributes_csv(path: str | Path) -> list[AttributePoint]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["utterance_id", "arousal", "valence", "dominance"]:
            raise ProviderError(f"{path}: not an attribute table")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise ProviderError(f"{path}: corrupted row at line {lineno}")
            try:
                out.append(
                    AttributePoint(
                        utterance_id=row[0],
                        arousal=float(row[1]),
                        valence=float(row[2]),
                        dominance=float(row[3]),
                    )
                )
            except ValueError:
                raise ProviderError(f"{path}: corrupted row at line {lineno}")
    return out
