"""Cluster-driven sampling: draw utterance sets that share one emotion id.

Each draw picks an emotion id uniformly, then members uniformly from that
cluster — without replacement when the cluster is large enough, with
replacement (flagged) otherwise. One sampler instance is one deterministic
stream; interleaving draws from two consumers would fork the stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from emodistill.cluster.matching import PseudoLabelTable
from emodistill.errors import ClusterError


@dataclass(frozen=True)
class SamplingSet:
    emotion_id: int
    utterance_ids: tuple[str, ...]
    with_replacement: bool


class ClusterSampler:
    def __init__(self, table: PseudoLabelTable, set_size: int = 5, seed: int = 0):
        if not table.rows:
            raise ClusterError("cannot build a sampler from an empty pseudo-label table")
        if set_size < 1:
            raise ClusterError(f"set_size must be >= 1, got {set_size}")
        groups: dict[int, list[str]] = {}
        for utt_id, _, emotion_id in sorted(table.rows):
            groups.setdefault(emotion_id, []).append(utt_id)
        self.groups = {emo: tuple(ids) for emo, ids in sorted(groups.items())}
        self.emotion_ids = tuple(sorted(self.groups))
        self.set_size = set_size
        self.rng = np.random.default_rng(seed)

    def draw(self) -> SamplingSet:
        emotion_id = int(self.rng.choice(self.emotion_ids))
        members = self.groups[emotion_id]
        replace = len(members) < self.set_size
        picked = self.rng.choice(len(members), size=self.set_size, replace=replace)
        return SamplingSet(
            emotion_id=emotion_id,
            utterance_ids=tuple(members[i] for i in picked),
            with_replacement=replace,
        )


def build_sampler(table: PseudoLabelTable, set_size: int = 5, seed: int = 0) -> ClusterSampler:
    return ClusterSampler(table, set_size=set_size, seed=seed)
