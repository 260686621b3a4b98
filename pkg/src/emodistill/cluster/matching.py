"""Per-speaker clustering state and cross-speaker cluster alignment.

Alignment works on angles only: each non-neutral cluster is a direction on
the unit sphere around its speaker's neutral centroid. The lowest speaker id
anchors the emotion ids, every other speaker is matched to the current
reference directions with a Hungarian assignment, references are recomputed
as spherical means of the matched groups, and the loop repeats until stable.

Matched emotion ids are 1-based in tables and reports, with id 1 reserved for
neutral. In-memory cluster indices stay 0-based.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from emodistill.cluster.hull import find_neutral, leave_one_out_scores
from emodistill.cluster.kmeans import kmeans
from emodistill.cluster.spherical import angular_distance, avd_to_xyz, direction, to_spherical
from emodistill.errors import ClusterError, GeometryError
from emodistill.providers.extractors import AttributePoint, SpeakerEmbedding


@dataclass
class ClusterSet:
    speaker_id: str
    members: list[list[str]]
    centroids_embed: np.ndarray
    centroids_attr: np.ndarray | None = None
    neutral_index: int | None = None
    angles: dict[int, tuple[float, float, float]] = field(default_factory=dict)
    neutral_mode: str = ""

    @property
    def n_clusters(self) -> int:
        return len(self.members)


@dataclass
class PseudoLabelTable:
    rows: list[tuple[str, str, int]]  # utterance_id, speaker_id, matched_emotion_id

    def by_utterance(self) -> dict[str, int]:
        return {utt: emo for utt, _, emo in self.rows}

    def emotion_ids(self) -> list[int]:
        return sorted({emo for _, _, emo in self.rows})

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["utterance_id", "speaker_id", "matched_emotion_id"])
            for row in sorted(self.rows):
                writer.writerow(row)

    @classmethod
    def read_csv(cls, path: str | Path) -> "PseudoLabelTable":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["utterance_id", "speaker_id", "matched_emotion_id"]:
                raise ClusterError(f"{path}: not a pseudo-label table")
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 3:
                    raise ClusterError(f"{path}: corrupted row at line {lineno}")
                try:
                    rows.append((row[0], row[1], int(row[2])))
                except ValueError:
                    raise ClusterError(f"{path}: corrupted row at line {lineno}")
        return cls(rows=rows)


def cluster_speaker(
    embeddings: list[SpeakerEmbedding],
    n_clusters: int,
    seed: int = 0,
    normalize: bool = False,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ClusterSet:
    """k-means over one speaker's utterance embeddings."""
    if not embeddings:
        raise ClusterError("no embeddings supplied")
    ids = [e.utterance_id for e in embeddings]
    points = np.stack([e.vector for e in embeddings])
    if normalize:
        points = points / np.maximum(np.linalg.norm(points, axis=1, keepdims=True), 1e-12)
    labels, centers = kmeans(points, n_clusters, seed=seed, max_iter=max_iter, tol=tol)
    members = [[ids[i] for i in np.flatnonzero(labels == c)] for c in range(n_clusters)]
    return ClusterSet(speaker_id="", members=members, centroids_embed=centers)


def attach_attribute_centroids(
    cluster_set: ClusterSet, points: list[AttributePoint]
) -> ClusterSet:
    """Mean attribute point per cluster (the set S in neutral selection)."""
    lookup = {p.utterance_id: p.as_array() for p in points}
    centroids = []
    for cluster in cluster_set.members:
        rows = []
        for utt_id in cluster:
            if utt_id not in lookup:
                raise ClusterError(f"no attribute point for utterance {utt_id!r}")
            rows.append(lookup[utt_id])
        centroids.append(np.mean(rows, axis=0))
    return replace(cluster_set, centroids_attr=np.asarray(centroids))


def attach_neutral_geometry(cluster_set: ClusterSet) -> ClusterSet:
    """Pick the neutral cluster and compute spherical angles of the others."""
    if cluster_set.centroids_attr is None:
        raise ClusterError("attach_attribute_centroids must run first")
    xyz = np.stack([avd_to_xyz(p) for p in cluster_set.centroids_attr])
    neutral = find_neutral(xyz)
    _, mode = leave_one_out_scores(xyz)
    angles = {}
    for i in range(len(xyz)):
        if i == neutral:
            continue
        try:
            angles[i] = to_spherical(xyz[i], xyz[neutral])
        except GeometryError:
            raise ClusterError(
                f"cluster {i} of speaker {cluster_set.speaker_id!r} coincides with the "
                "neutral centroid; angles undefined"
            )
    return replace(cluster_set, neutral_index=neutral, angles=angles, neutral_mode=mode)


def _angle_order(cluster_set: ClusterSet) -> list[int]:
    """Non-neutral cluster indices sorted by (azimuth, elevation)."""
    return sorted(cluster_set.angles, key=lambda i: (cluster_set.angles[i][0], cluster_set.angles[i][1]))


def match_speakers(
    cluster_sets: list[ClusterSet], max_rounds: int = 10
) -> tuple[PseudoLabelTable, dict]:
    """Align clusters across speakers into shared emotion ids.

    Returns the pseudo-label table and a diagnostic report (per-speaker
    matching cost, rounds used, reference directions).
    """
    if not cluster_sets:
        raise ClusterError("no cluster sets to match")
    sizes = {cs.n_clusters for cs in cluster_sets}
    if len(sizes) != 1:
        raise ClusterError(f"cluster counts differ across speakers: {sorted(sizes)}")
    m = sizes.pop()
    for cs in cluster_sets:
        if cs.neutral_index is None:
            raise ClusterError(f"speaker {cs.speaker_id!r} has no neutral index")
        if len(cs.angles) != m - 1:
            raise ClusterError(
                f"speaker {cs.speaker_id!r} has {len(cs.angles)} angle sets, expected {m - 1}"
            )

    ordered = sorted(cluster_sets, key=lambda cs: cs.speaker_id)
    anchor = ordered[0]

    # emotion ids: 1 = neutral, 2..m assigned from the anchor's angle order
    assignments: dict[str, dict[int, int]] = {}
    anchor_assign = {ci: g + 2 for g, ci in enumerate(_angle_order(anchor))}
    assignments[anchor.speaker_id] = anchor_assign

    ref_dirs = {}
    for ci, gid in anchor_assign.items():
        az, el, _ = anchor.angles[ci]
        ref_dirs[gid] = direction(az, el)

    costs = {anchor.speaker_id: 0.0}
    rounds_used = 0
    for _ in range(max_rounds):
        rounds_used += 1
        previous = {spk: dict(asg) for spk, asg in assignments.items()}
        for cs in ordered[1:]:
            cluster_ids = sorted(cs.angles)
            group_ids = sorted(ref_dirs)
            cost = np.zeros((len(cluster_ids), len(group_ids)))
            for i, ci in enumerate(cluster_ids):
                az, el, _ = cs.angles[ci]
                for j, gid in enumerate(group_ids):
                    ref = ref_dirs[gid]
                    ref_az = float(np.arctan2(ref[1], ref[0]))
                    ref_el = float(np.arcsin(np.clip(ref[2], -1.0, 1.0)))
                    cost[i, j] = angular_distance((az, el), (ref_az, ref_el))
            rows, cols = linear_sum_assignment(cost)
            assignments[cs.speaker_id] = {
                cluster_ids[i]: group_ids[j] for i, j in zip(rows, cols)
            }
            costs[cs.speaker_id] = float(cost[rows, cols].sum())
        # spherical mean of each matched group becomes the new reference
        new_refs = {}
        for gid in sorted(ref_dirs):
            vecs = []
            for cs in ordered:
                for ci, g in assignments[cs.speaker_id].items():
                    if g == gid:
                        az, el, _ = cs.angles[ci]
                        vecs.append(direction(az, el))
            mean = np.mean(vecs, axis=0)
            norm = np.linalg.norm(mean)
            new_refs[gid] = mean / norm if norm > 1e-12 else ref_dirs[gid]
        ref_dirs = new_refs
        if len(ordered) == 1 or all(
            assignments[spk] == previous.get(spk) for spk in assignments if spk != anchor.speaker_id
        ):
            break

    rows = []
    for cs in ordered:
        mapping = dict(assignments[cs.speaker_id])
        mapping[cs.neutral_index] = 1
        for ci, utt_ids in enumerate(cs.members):
            for utt_id in utt_ids:
                rows.append((utt_id, cs.speaker_id, mapping[ci]))

    report = {
        "n_clusters": m,
        "rounds": rounds_used,
        "anchor_speaker": anchor.speaker_id,
        "matching_cost": costs,
        "reference_directions": {str(g): ref_dirs[g].tolist() for g in sorted(ref_dirs)},
    }
    return PseudoLabelTable(rows=rows), report
