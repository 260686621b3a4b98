import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from emodistill.cluster import (
    ClusterSet,
    attach_attribute_centroids,
    attach_neutral_geometry,
    cluster_speaker,
    match_speakers,
)
from emodistill.cluster.spherical import direction, to_spherical
from emodistill.errors import ClusterError
from emodistill.providers import SyntheticAttributeProvider
from emodistill.providers.corpus import attribute_directions
from oracles import assignment_bruteforce, cluster_purity


def _group_by_speaker(corpus, embeddings):
    by_speaker = {}
    for emb in embeddings:
        spk = corpus.ground_truth[emb.utterance_id][0]
        by_speaker.setdefault(spk, []).append(emb)
    return by_speaker


def test_cluster_speaker_perfect_purity(small_corpus, small_embeddings):
    by_speaker = _group_by_speaker(small_corpus, small_embeddings)
    for spk, embs in by_speaker.items():
        cs = cluster_speaker(embs, 5, seed=1)
        labels, truth = [], []
        for ci, members in enumerate(cs.members):
            assert members, "no cluster may be empty"
            for utt_id in members:
                labels.append(ci)
                truth.append(small_corpus.ground_truth[utt_id][1])
        assert cluster_purity(np.array(labels), np.array(truth)) == 1.0


def test_cluster_speaker_too_few_points(small_embeddings):
    with pytest.raises(ClusterError):
        cluster_speaker(small_embeddings[:3], 5)


def test_attach_centroids_arithmetic():
    from emodistill.providers.extractors import AttributePoint

    cs = ClusterSet(
        speaker_id="s",
        members=[["a"], ["b", "c"]],
        centroids_embed=np.zeros((2, 4)),
    )
    points = [
        AttributePoint("a", 0.5, -0.25, 0.125),
        AttributePoint("b", 0.0, 0.0, 0.0),
        AttributePoint("c", 2.0, 0.0, 0.0),
    ]
    out = attach_attribute_centroids(cs, points)
    np.testing.assert_allclose(out.centroids_attr[0], [0.5, -0.25, 0.125])
    np.testing.assert_allclose(out.centroids_attr[1], [1.0, 0.0, 0.0])


def test_attach_centroids_missing_point_named():
    cs = ClusterSet(speaker_id="s", members=[["a", "zz"]], centroids_embed=np.zeros((1, 4)))
    from emodistill.providers.extractors import AttributePoint

    with pytest.raises(ClusterError, match="zz"):
        attach_attribute_centroids(cs, [AttributePoint("a", 0, 0, 0)])


def test_cluster_centroids_near_generator_cells(small_corpus, small_embeddings, small_attributes):
    provider = SyntheticAttributeProvider()
    sigma = provider.sigma(small_corpus)
    dirs = attribute_directions(small_corpus.spec.n_emotions, small_corpus.spec.seed)
    by_speaker = _group_by_speaker(small_corpus, small_embeddings)
    for spk, embs in by_speaker.items():
        cs = cluster_speaker(embs, 5, seed=1)
        cs = attach_attribute_centroids(cs, small_attributes)
        for ci, members in enumerate(cs.members):
            emo = small_corpus.ground_truth[members[0]][1]
            bound = 4.0 * sigma / np.sqrt(len(members))
            assert np.linalg.norm(cs.centroids_attr[ci] - dirs[emo]) < 3 * bound


def _make_cluster_set(speaker_id, angle_list, neutral_first=True):
    m = len(angle_list) + 1
    members = [[f"{speaker_id}_c{i}"] for i in range(m)]
    cs = ClusterSet(speaker_id=speaker_id, members=members, centroids_embed=np.zeros((m, 2)))
    cs.neutral_index = 0
    cs.angles = {i + 1: (az, el, 1.0) for i, (az, el) in enumerate(angle_list)}
    cs.neutral_mode = "volume"
    return cs


def test_identical_angle_sets_identity_match():
    angles = [(0.0, 0.0), (np.pi / 2, 0.1), (-np.pi / 2, -0.1), (np.pi, 0.3)]
    sets = [_make_cluster_set(f"s{i}", angles) for i in range(3)]
    table, report = match_speakers(sets)
    assert all(cost == pytest.approx(0.0, abs=1e-12) for cost in report["matching_cost"].values())
    by_utt = table.by_utterance()
    for ci in range(1, 5):
        ids = {by_utt[f"s{k}_c{ci}"] for k in range(3)}
        assert len(ids) == 1
    assert {by_utt[f"s{k}_c0"] for k in range(3)} == {1}


def test_single_speaker_bijection():
    angles = [(0.3, 0.0), (-0.4, 0.2), (2.0, -0.1), (1.0, 0.5)]
    table, _ = match_speakers([_make_cluster_set("solo", angles)])
    ids = sorted(emo for _, _, emo in table.rows)
    assert ids == [1, 2, 3, 4, 5]


def test_mismatched_cluster_counts_rejected():
    a = _make_cluster_set("a", [(0.0, 0.0), (1.0, 0.0)])
    b = _make_cluster_set("b", [(0.0, 0.0)])
    with pytest.raises(ClusterError, match="differ"):
        match_speakers([a, b])


def test_missing_angles_rejected():
    a = _make_cluster_set("a", [(0.0, 0.0), (1.0, 0.0)])
    del a.angles[2]
    with pytest.raises(ClusterError, match="angle"):
        match_speakers([a])


def _perturb_direction(vec, max_deg, rng):
    axis = rng.normal(size=3)
    axis -= axis @ vec * vec
    axis /= np.linalg.norm(axis)
    angle = np.deg2rad(rng.uniform(0, max_deg))
    return np.cos(angle) * vec + np.sin(angle) * axis


def test_perturbed_prototypes_recovered(rng):
    protos = [direction(az, el) for az, el in [(0.0, 0.4), (1.6, -0.5), (-2.0, 0.1), (2.8, 0.9)]]
    hits = 0
    trials = 40
    for _ in range(trials):
        sets = []
        orders = []
        for s in range(3):
            order = rng.permutation(4)
            orders.append(order)
            angles = []
            for gi in order:
                v = _perturb_direction(np.array(protos[gi]), 5.0, rng)
                az, el, _ = to_spherical(v, np.zeros(3))
                angles.append((az, el))
            sets.append(_make_cluster_set(f"s{s}", angles))
        table, _ = match_speakers(sets)
        by_utt = table.by_utterance()
        ok = True
        for gi in range(4):
            ids = set()
            for s in range(3):
                ci = int(np.flatnonzero(orders[s] == gi)[0]) + 1
                ids.add(by_utt[f"s{s}_c{ci}"])
            ok &= len(ids) == 1
        hits += ok
    assert hits == trials


def test_pairwise_costs_match_bruteforce(rng):
    for _ in range(30):
        cost = rng.uniform(0, 2, size=(4, 4))
        rows, cols = linear_sum_assignment(cost)
        lap = float(cost[rows, cols].sum())
        brute, _ = assignment_bruteforce(cost)
        assert lap == pytest.approx(brute, abs=1e-12)


def test_table_bijection_per_speaker(rng):
    # random angle sets: each speaker's clusters map onto 1..M exactly once
    for _ in range(10):
        sets = []
        for s in range(4):
            angles = [
                (rng.uniform(-np.pi, np.pi), rng.uniform(-1.2, 1.2)) for _ in range(4)
            ]
            sets.append(_make_cluster_set(f"s{s}", angles))
        table, _ = match_speakers(sets)
        per_speaker = {}
        for utt, spk, emo in table.rows:
            per_speaker.setdefault(spk, []).append(emo)
        for ids in per_speaker.values():
            assert sorted(ids) == [1, 2, 3, 4, 5]
