"""Multi-crop extraction from sampled utterance sets.

Long crops feed the teacher, all crops feed the student. Crop lengths are
fixed frame counts derived from seconds at the corpus hop; utterances shorter
than a crop are symmetrically edge-padded with repeated boundary frames and
the padding is recorded so the waveform path can mirror it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from emodistill.errors import CorpusError
from emodistill.sampling.sampler import SamplingSet


def seconds_to_frames(seconds: float, sample_rate: int = 16000, hop: int = 256) -> int:
    """Whole-frame crop length: round-half-up of seconds * sample_rate / hop."""
    return int(np.floor(seconds * sample_rate / hop + 0.5))


@dataclass
class Crop:
    mel: np.ndarray
    long: bool
    source_index: int
    utterance_id: str
    start_frame: int
    pad: tuple[int, int] = (0, 0)

    @property
    def n_frames(self) -> int:
        return self.mel.shape[0]


@dataclass
class CropBatch:
    crops: list[Crop]
    emotion_id: int

    @property
    def n_total(self) -> int:
        return len(self.crops)

    @property
    def n_long(self) -> int:
        return sum(1 for c in self.crops if c.long)

    @property
    def long_indices(self) -> list[int]:
        return [i for i, c in enumerate(self.crops) if c.long]

    @property
    def flags(self) -> list[bool]:
        return [c.long for c in self.crops]

    def validate(self) -> None:
        dims = {c.mel.shape[1] for c in self.crops}
        if len(dims) > 1:
            raise CorpusError(f"mixed mel dimensions in one crop batch: {sorted(dims)}")


def _pad_slice(mel: np.ndarray, start: int, length: int) -> tuple[np.ndarray, tuple[int, int]]:
    have = mel.shape[0]
    if have >= length:
        return mel[start : start + length], (0, 0)
    left = (length - have) // 2
    right = length - have - left
    padded = np.concatenate(
        [np.repeat(mel[:1], left, axis=0), mel, np.repeat(mel[-1:], right, axis=0)]
    )
    return padded, (left, right)


def extract_crops(
    sampling_set: SamplingSet,
    mels: dict[str, np.ndarray],
    n_long: int = 2,
    n_short: int = 4,
    long_frames: int = 188,
    short_frames: int = 125,
    rng: np.random.Generator | None = None,
) -> CropBatch:
    """Random crops per utterance: ``n_long`` long + ``n_short`` short each."""
    rng = rng or np.random.default_rng(0)
    crops: list[Crop] = []
    for source_index, utt_id in enumerate(sampling_set.utterance_ids):
        if utt_id not in mels:
            raise CorpusError(f"no mel available for utterance {utt_id!r}")
        mel = mels[utt_id]
        if mel.shape[0] == 0:
            raise CorpusError(f"empty mel for utterance {utt_id!r}")
        for long, count, frames in ((True, n_long, long_frames), (False, n_short, short_frames)):
            for _ in range(count):
                max_start = mel.shape[0] - frames
                start = int(rng.integers(0, max_start + 1)) if max_start > 0 else 0
                window, pad = _pad_slice(mel, start, frames)
                crops.append(
                    Crop(
                        mel=window,
                        long=long,
                        source_index=source_index,
                        utterance_id=utt_id,
                        start_frame=start,
                        pad=pad,
                    )
                )
    batch = CropBatch(crops=crops, emotion_id=sampling_set.emotion_id)
    batch.validate()
    return batch
