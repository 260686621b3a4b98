"""Evaluation probes, similarity statistics, report building, and plots.

This is the one module allowed to read the ground-truth label table: the
probes it trains are test oracles for the unsupervised pipeline, never a
training signal.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import torch
from scipy.optimize import linear_sum_assignment
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import train_test_split

from emodistill.cluster.matching import PseudoLabelTable
from emodistill.inference import Pipeline
from emodistill.providers.corpus import Utterance
from emodistill.training import reference_crop


def embed_utterances(pipeline: Pipeline, utterances: list[Utterance]) -> dict[str, np.ndarray]:
    """Student-encoder embedding of every utterance's fixed reference crop."""
    out = {}
    batch = 64
    with torch.no_grad():
        for i in range(0, len(utterances), batch):
            chunk = utterances[i : i + batch]
            crops = np.stack(
                [
                    pipeline.stats.norm_mel(reference_crop(u.mel, pipeline.short_frames))
                    for u in chunk
                ]
            )
            e = pipeline.distiller.embed_reference(torch.from_numpy(crops).float())
            for u, vec in zip(chunk, e.numpy()):
                out[u.utterance_id] = vec
    return out


def cosine_similarity_stats(
    embeddings: dict[str, np.ndarray], labels: dict[str, int]
) -> tuple[float, float]:
    """(mean intra-class cosine, mean inter-class cosine) over all pairs."""
    ids = sorted(embeddings)
    mat = np.stack([embeddings[i] for i in ids])
    mat = mat / np.maximum(np.linalg.norm(mat, axis=1, keepdims=True), 1e-12)
    sims = mat @ mat.T
    lab = np.array([labels[i] for i in ids])
    same = lab[:, None] == lab[None, :]
    off_diag = ~np.eye(len(ids), dtype=bool)
    intra = float(sims[same & off_diag].mean())
    inter = float(sims[~same].mean())
    return intra, inter


def linear_probe_accuracy(
    features: np.ndarray, labels: np.ndarray, seed: int = 0, test_frac: float = 0.3
) -> float:
    """Held-out accuracy of a logistic-regression probe."""
    x_tr, x_te, y_tr, y_te = train_test_split(
        features, labels, test_size=test_frac, random_state=seed, stratify=labels
    )
    probe = LogisticRegression(max_iter=2000)
    probe.fit(x_tr, y_tr)
    return float(probe.score(x_te, y_te))


def matching_accuracy(table: PseudoLabelTable, ground_truth: dict[str, tuple[str, int]]) -> float:
    """Accuracy of pseudo-labels under the best label bijection (Hungarian)."""
    pred, true = [], []
    for utt_id, _, matched in table.rows:
        pred.append(matched)
        true.append(ground_truth[utt_id][1])
    pred_vals = sorted(set(pred))
    true_vals = sorted(set(true))
    size = max(len(pred_vals), len(true_vals))
    confusion = np.zeros((size, size))
    for p, t in zip(pred, true):
        confusion[pred_vals.index(p), true_vals.index(t)] += 1
    rows, cols = linear_sum_assignment(-confusion)
    return float(confusion[rows, cols].sum() / len(pred))


def mel_probe_features(mel: np.ndarray, stats) -> np.ndarray:
    """Summary features for the synthesis probe: per-bin means + global stats."""
    normed = stats.norm_mel(mel)
    return np.concatenate(
        [normed.mean(axis=0), normed.std(axis=0), [normed.mean(), normed.std()]]
    )


def synthesis_emotion_probe(
    pipeline: Pipeline,
    utterances: list[Utterance],
    ground_truth: dict[str, tuple[str, int]],
    synthesized: list[tuple[np.ndarray, int]],
    seed: int = 0,
) -> float:
    """Train an emotion probe on real mels, score it on synthesized ones."""
    feats = np.stack([mel_probe_features(u.mel, pipeline.stats) for u in utterances])
    labels = np.array([ground_truth[u.utterance_id][1] for u in utterances])
    probe = LogisticRegression(max_iter=2000, random_state=seed)
    probe.fit(feats, labels)
    syn_feats = np.stack([mel_probe_features(mel, pipeline.stats) for mel, _ in synthesized])
    syn_labels = np.array([label for _, label in synthesized])
    return float(probe.score(syn_feats, syn_labels))


def random_projection_2d(features: np.ndarray, seed: int = 0) -> np.ndarray:
    """Fixed random 2-D projection (stands in for t-SNE at desk scale)."""
    rng = np.random.default_rng(seed)
    proj = rng.normal(size=(features.shape[1], 2)) / np.sqrt(features.shape[1])
    return features @ proj


def load_report_schema() -> dict:
    text = resources.files("emodistill.schemas").joinpath("eval_report.schema.json").read_text()
    return json.loads(text)


def validate_report(report: dict) -> None:
    jsonschema.validate(report, load_report_schema())


def build_report(
    config_hash: str,
    checkpoint_step: int,
    intra: float,
    inter: float,
    emotion_acc: float,
    speaker_acc: float,
    match_acc: float | None,
    synthesis_acc: float | None,
    plots: list[str],
) -> dict:
    report = {
        "config_hash": config_hash,
        "checkpoint_step": checkpoint_step,
        "embedding_similarity": {"intra_emotion": intra, "inter_emotion": inter},
        "probes": {
            "emotion_accuracy": emotion_acc,
            "speaker_accuracy": speaker_acc,
            "synthesis_emotion_accuracy": synthesis_acc,
        },
        "matching": {"accuracy": match_acc},
        "plots": plots,
    }
    validate_report(report)
    return report


# ---------------------------------------------------------------------------
# plotting (matplotlib, file output only)


def plot_angle_scatter(cluster_report: dict, path: str | Path) -> None:
    """Azimuth/elevation scatter of matched clusters, one marker per speaker."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    speakers = cluster_report.get("speakers", {})
    for spk, info in sorted(speakers.items()):
        angles = info.get("angles", {})
        for cluster, (az, el, _r) in angles.items():
            ax.scatter(az, el, s=18)
            ax.annotate(spk.lstrip("s"), (az, el), fontsize=7)
    ax.set_xlabel("azimuth (rad)")
    ax.set_ylabel("elevation (rad)")
    ax.set_title("cluster directions around the neutral centroid")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_projection(points: np.ndarray, labels: np.ndarray, path: str | Path, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    for value in sorted(set(labels.tolist())):
        mask = labels == value
        ax.scatter(points[mask, 0], points[mask, 1], s=10, label=str(value))
    ax.legend(fontsize=7, markerscale=1.5)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
