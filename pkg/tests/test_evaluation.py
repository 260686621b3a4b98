import numpy as np
import pytest

from emodistill import evaluation
from emodistill.cluster.matching import PseudoLabelTable
from emodistill.training import NormStats


def test_cosine_stats_hand_example():
    embeddings = {
        "a": np.array([1.0, 0.0]),
        "b": np.array([1.0, 0.0]),
        "c": np.array([0.0, 1.0]),
    }
    labels = {"a": 0, "b": 0, "c": 1}
    intra, inter = evaluation.cosine_similarity_stats(embeddings, labels)
    assert intra == pytest.approx(1.0)
    assert inter == pytest.approx(0.0)


def test_linear_probe_on_separable_data(rng):
    x = np.concatenate([rng.normal(0, 0.2, (60, 8)), rng.normal(4, 0.2, (60, 8))])
    y = np.array([0] * 60 + [1] * 60)
    assert evaluation.linear_probe_accuracy(x, y, seed=1) == 1.0


def test_matching_accuracy_under_relabeling():
    gt = {f"u{i}": ("s0", i % 3) for i in range(30)}
    # pseudo ids are a permutation of the truth: accuracy must be 1
    remap = {0: 2, 1: 3, 2: 1}
    table = PseudoLabelTable(rows=[(f"u{i}", "s0", remap[i % 3]) for i in range(30)])
    assert evaluation.matching_accuracy(table, gt) == 1.0
    # corrupt a third of the rows
    rows = [(f"u{i}", "s0", remap[(i % 3 + (1 if i < 10 else 0)) % 3]) for i in range(30)]
    acc = evaluation.matching_accuracy(PseudoLabelTable(rows=rows), gt)
    assert acc == pytest.approx(2 / 3, abs=0.04)


def test_report_schema_validation():
    report = evaluation.build_report(
        config_hash="abc",
        checkpoint_step=5,
        intra=0.8,
        inter=0.2,
        emotion_acc=0.9,
        speaker_acc=0.4,
        match_acc=1.0,
        synthesis_acc=None,
        plots=["x.png"],
    )
    evaluation.validate_report(report)
    import jsonschema

    bad = dict(report)
    bad["probes"] = {"emotion_accuracy": 2.0, "speaker_accuracy": 0.1}
    with pytest.raises(jsonschema.ValidationError):
        evaluation.validate_report(bad)


def test_random_projection_deterministic(rng):
    x = rng.normal(size=(20, 16))
    a = evaluation.random_projection_2d(x, seed=4)
    b = evaluation.random_projection_2d(x, seed=4)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (20, 2)


def test_mel_probe_features_shape(rng):
    stats = NormStats(0.0, 1.0, 0.0, 1.0, 0.0, 1.0)
    mel = rng.normal(size=(40, 80)).astype(np.float32)
    feats = evaluation.mel_probe_features(mel, stats)
    assert feats.shape == (162,)
