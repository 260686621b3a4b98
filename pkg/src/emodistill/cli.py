"""Command-line entry points.

Commands: gen-data, cluster-match, train, eval, synth, plot. Paths are
resolved against $EMODISTILL_DATA_ROOT when relative. Exit codes: 0 success,
2 usage/config error, 3 missing input, 4 artifact lineage mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from emodistill import audio
from emodistill.cluster import (
    attach_attribute_centroids,
    attach_neutral_geometry,
    cluster_speaker,
    match_speakers,
)
from emodistill.cluster.matching import PseudoLabelTable
from emodistill.config import PipelineConfig
from emodistill.errors import (
    ConfigError,
    CorpusError,
    EmodistillError,
    LineageError,
    MissingInputError,
)
from emodistill.providers import (
    SyntheticAttributeProvider,
    SyntheticCorpusSpec,
    SyntheticEmbeddingProvider,
    generate_corpus,
    load_corpus,
    load_ground_truth,
    save_corpus,
    write_attributes_csv,
    write_embeddings_csv,
)
from emodistill.providers.extractors import read_attributes_csv, read_embeddings_csv

DATA_ROOT_ENV = "EMODISTILL_DATA_ROOT"


def _resolve(path: str) -> Path:
    p = Path(path)
    if p.is_absolute():
        return p
    root = os.environ.get(DATA_ROOT_ENV)
    return Path(root) / p if root else p


def _load_config(args, fallback: Path | None = None) -> PipelineConfig:
    """Effective config: --config file (or a fallback file) + presets + --set."""
    if args.config:
        cfg = PipelineConfig.from_file(_resolve(args.config))
    elif fallback is not None and fallback.exists():
        cfg = PipelineConfig.from_file(fallback)
    else:
        cfg = PipelineConfig.default()
    if getattr(args, "preset", None):
        cfg.apply_preset(args.preset)
    cfg.apply_overrides(args.set or [])
    return cfg


def _require(paths: list[Path]) -> None:
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        raise MissingInputError("missing required input(s): " + ", ".join(missing))


# ---------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    cfg = _load_config(args)
    for flag, key in (
        ("speakers", "n_speakers"),
        ("emotions", "n_emotions"),
        ("utts_per_cell", "utterances_per_cell"),
        ("seed", "seed"),
    ):
        value = getattr(args, flag)
        if value is not None:
            cfg["providers"][key] = value
    outdir = _resolve(args.out)
    if outdir.exists() and any(outdir.iterdir()) and not args.force:
        print(f"error: output dir {outdir} is not empty (use --force)", file=sys.stderr)
        return 2
    pcfg = cfg["providers"]
    spec = SyntheticCorpusSpec(
        n_speakers=pcfg["n_speakers"],
        n_emotions=pcfg["n_emotions"],
        utterances_per_cell=pcfg["utterances_per_cell"],
        sample_rate=pcfg["sample_rate"],
        seed=pcfg["seed"],
        embed_dim=pcfg["embed_dim"],
        embed_separation=pcfg["embed_separation"],
        noise_scale=pcfg["noise_scale"],
        attr_noise_scale=pcfg["attr_noise_scale"],
    )
    corpus = generate_corpus(spec)
    save_corpus(corpus, outdir, config_hash=cfg.hash())
    write_embeddings_csv(outdir / "embeddings.csv", SyntheticEmbeddingProvider().extract(corpus))
    write_attributes_csv(outdir / "attributes.csv", SyntheticAttributeProvider().predict(corpus))
    cfg.write(outdir / "gen_data.config.toml")
    print(f"wrote {len(corpus)} utterances to {outdir} (config {cfg.hash()})")
    return 0


def cmd_cluster_match(args) -> int:
    cfg = _load_config(args)
    data_dir = _resolve(args.data)
    outdir = _resolve(args.out) if args.out else data_dir
    outdir.mkdir(parents=True, exist_ok=True)
    manifest_path = data_dir / "manifest.json"
    emb_path = data_dir / "embeddings.csv"
    attr_path = data_dir / "attributes.csv"
    _require([manifest_path, emb_path, attr_path])

    manifest = json.loads(manifest_path.read_text())
    speaker_of = {e["utterance_id"]: e["speaker_id"] for e in manifest["utterances"]}
    embeddings = read_embeddings_csv(emb_path)
    attributes = read_attributes_csv(attr_path)

    ccfg = cfg["cluster_match"]
    by_speaker: dict[str, list] = {}
    for emb in embeddings:
        if emb.utterance_id not in speaker_of:
            raise CorpusError(f"embedding for unknown utterance {emb.utterance_id!r}")
        by_speaker.setdefault(speaker_of[emb.utterance_id], []).append(emb)

    cluster_sets = []
    speakers_info = {}
    for idx, spk in enumerate(sorted(by_speaker)):
        cs = cluster_speaker(
            by_speaker[spk],
            ccfg["clusters"],
            seed=ccfg["seed"] + idx,
            normalize=ccfg["normalize_embeddings"],
            max_iter=ccfg["kmeans_max_iter"],
            tol=ccfg["kmeans_tol"],
        )
        cs.speaker_id = spk
        cs = attach_attribute_centroids(cs, attributes)
        cs = attach_neutral_geometry(cs)
        cluster_sets.append(cs)
    table, match_report = match_speakers(cluster_sets, max_rounds=ccfg["max_rounds"])

    from emodistill.cluster.hull import leave_one_out_scores
    from emodistill.cluster.spherical import avd_to_xyz

    for cs in cluster_sets:
        xyz = np.stack([avd_to_xyz(p) for p in cs.centroids_attr])
        scores, mode = leave_one_out_scores(xyz)
        speakers_info[cs.speaker_id] = {
            "neutral_index": int(cs.neutral_index),
            "neutral_mode": mode,
            "leave_one_out_measures": [float(s) for s in scores],
            "angles": {str(ci): list(map(float, cs.angles[ci])) for ci in sorted(cs.angles)},
            "matching_cost": match_report["matching_cost"].get(cs.speaker_id, 0.0),
        }

    table.write_csv(outdir / "pseudo_labels.csv")
    report = {
        "config_hash": cfg.hash(),
        "data_hash": manifest.get("config_hash", ""),
        "n_clusters": match_report["n_clusters"],
        "rounds": match_report["rounds"],
        "anchor_speaker": match_report["anchor_speaker"],
        "reference_directions": match_report["reference_directions"],
        "speakers": speakers_info,
    }
    (outdir / "cluster_report.json").write_text(json.dumps(report, sort_keys=True, indent=1))
    cfg.write(outdir / "cluster_match.config.toml")
    print(
        f"matched {len(table.rows)} utterances across {len(cluster_sets)} speakers "
        f"into {match_report['n_clusters']} emotion ids"
    )
    return 0


def cmd_train(args) -> int:
    from emodistill.training import JointTrainer

    cfg = _load_config(args)
    if args.steps is not None:
        cfg["training"]["steps"] = args.steps
    if args.w_dino is not None:
        cfg["training"]["w_dino"] = args.w_dino
    data_dir = _resolve(args.data)
    ckpt_dir = _resolve(args.out)
    _require([data_dir / "manifest.json", data_dir / "pseudo_labels.csv"])
    subset = None
    if args.subset_file:
        subset = [
            line.strip()
            for line in Path(_resolve(args.subset_file)).read_text().splitlines()
            if line.strip()
        ]
    trainer = JointTrainer(cfg, data_dir, ckpt_dir, utterance_ids=subset)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    cfg.write(ckpt_dir / "train.config.toml")
    metrics_path = trainer.train(resume=args.resume)
    print(f"trained to step {trainer.total_steps}; metrics at {metrics_path}")
    return 0


def cmd_eval(args) -> int:
    from emodistill import evaluation
    from emodistill.inference import load_pipeline

    data_dir = _resolve(args.data)
    ckpt_dir = _resolve(args.checkpoint)
    cfg = _load_config(args, fallback=ckpt_dir / "train.config.toml")
    outdir = _resolve(args.out) if args.out else ckpt_dir
    outdir.mkdir(parents=True, exist_ok=True)
    _require([data_dir / "manifest.json", ckpt_dir / "manifest.json"])

    pipeline = load_pipeline(ckpt_dir, cfg)
    manifest, utterances = load_corpus(data_dir)
    if pipeline.data_hash and pipeline.data_hash != manifest.get("config_hash", ""):
        if not args.force:
            raise LineageError(
                f"checkpoint was trained on corpus {pipeline.data_hash}, found "
                f"{manifest.get('config_hash', '')} (use --force to evaluate anyway)"
            )
    ground_truth = load_ground_truth(data_dir)

    embeddings = evaluation.embed_utterances(pipeline, utterances)
    emo_labels = {u: ground_truth[u][1] for u in embeddings}
    spk_labels = {u: ground_truth[u][0] for u in embeddings}
    intra, inter = evaluation.cosine_similarity_stats(embeddings, emo_labels)

    ids = sorted(embeddings)
    feats = np.stack([embeddings[i] for i in ids])
    emotion_acc = evaluation.linear_probe_accuracy(
        feats, np.array([emo_labels[i] for i in ids]), seed=0
    )
    speaker_acc = evaluation.linear_probe_accuracy(
        feats, np.array([spk_labels[i] for i in ids]), seed=0
    )

    match_acc = None
    labels_path = data_dir / "pseudo_labels.csv"
    if labels_path.exists():
        match_acc = evaluation.matching_accuracy(
            PseudoLabelTable.read_csv(labels_path), ground_truth
        )

    synthesis_acc = None
    if args.synth_probe > 0:
        rng = np.random.default_rng(11)
        synthesized = []
        for _ in range(args.synth_probe):
            target = utterances[rng.integers(len(utterances))]
            others = [u for u in utterances if u.speaker_id != target.speaker_id]
            ref = others[rng.integers(len(others))]
            mel = pipeline.synthesize(target.phonemes, target.speaker_id, ref.mel)
            synthesized.append((mel, ground_truth[ref.utterance_id][1]))
        synthesis_acc = evaluation.synthesis_emotion_probe(
            pipeline, utterances, ground_truth, synthesized
        )

    plots = []
    proj = evaluation.random_projection_2d(feats, seed=3)
    emo_arr = np.array([emo_labels[i] for i in ids])
    spk_arr = np.array([spk_labels[i] for i in ids])
    for name, labels in (("emotion", emo_arr), ("speaker", spk_arr)):
        png = outdir / f"projection_{name}.png"
        evaluation.plot_projection(proj, labels, png, f"embedding projection by {name}")
        plots.append(str(png))
    np.savetxt(
        outdir / "projection.csv",
        proj,
        delimiter=",",
        header="x,y",
        comments="",
    )
    report_path = data_dir / "cluster_report.json"
    if report_path.exists():
        cluster_report = json.loads(report_path.read_text())
        if (
            cluster_report.get("data_hash")
            and cluster_report["data_hash"] != manifest.get("config_hash", "")
            and not args.force
        ):
            raise LineageError("cluster report was produced from a different corpus")
        png = outdir / "angle_scatter.png"
        evaluation.plot_angle_scatter(cluster_report, png)
        plots.append(str(png))

    report = evaluation.build_report(
        config_hash=cfg.hash(),
        checkpoint_step=pipeline.step,
        intra=intra,
        inter=inter,
        emotion_acc=emotion_acc,
        speaker_acc=speaker_acc,
        match_acc=match_acc,
        synthesis_acc=synthesis_acc,
        plots=plots,
    )
    (outdir / "eval_report.json").write_text(json.dumps(report, sort_keys=True, indent=1))
    cfg.write(outdir / "eval.config.toml")
    print(json.dumps({k: report[k] for k in ("embedding_similarity", "probes", "matching")}, indent=1))
    return 0


def _read_phonemes(path: Path) -> np.ndarray:
    data = json.loads(path.read_text())
    if isinstance(data, dict):
        data = data["phonemes"]
    return np.asarray(data, dtype=np.int64)


def _read_mel(path: Path, n_mels: int) -> np.ndarray:
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    if raw.size % n_mels != 0:
        raise CorpusError(f"{path}: size {raw.size} is not a multiple of n_mels={n_mels}")
    return raw.reshape(-1, n_mels)


def cmd_synth(args) -> int:
    from emodistill.inference import load_pipeline

    ckpt_dir = _resolve(args.checkpoint)
    cfg = _load_config(args, fallback=ckpt_dir / "train.config.toml")
    _require([ckpt_dir / "manifest.json"])
    pipeline = load_pipeline(ckpt_dir, cfg)

    requests = []
    if args.batch:
        batch_path = _resolve(args.batch)
        _require([batch_path])
        for req in json.loads(batch_path.read_text()):
            requests.append((req["speaker"], Path(req["ref_mel"]), Path(req["phonemes"]), Path(req["out"])))
    else:
        if not (args.speaker and args.ref_mel and args.phonemes and args.out):
            print("error: synth needs --speaker, --ref-mel, --phonemes, --out (or --batch)", file=sys.stderr)
            return 2
        requests.append((args.speaker, _resolve(args.ref_mel), _resolve(args.phonemes), _resolve(args.out)))

    for speaker, ref_path, phn_path, out_path in requests:
        _require([ref_path, phn_path])
        mel = pipeline.synthesize(
            _read_phonemes(phn_path), speaker, _read_mel(ref_path, pipeline.n_mels)
        )
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_bytes(mel.astype("<f4").tobytes())
        sidecar = {
            "n_frames": int(mel.shape[0]),
            "n_mels": int(mel.shape[1]),
            "speaker": speaker,
            "config_hash": pipeline.config_hash,
        }
        Path(str(out_path) + ".json").write_text(json.dumps(sidecar, sort_keys=True))
        print(f"synthesized {mel.shape[0]} frames -> {out_path}")
    return 0


def cmd_plot(args) -> int:
    from emodistill import evaluation

    report_path = _resolve(args.report)
    _require([report_path])
    outdir = _resolve(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    report = json.loads(report_path.read_text())
    png = outdir / "angle_scatter.png"
    evaluation.plot_angle_scatter(report, png)
    print(f"wrote {png}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emodistill")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
        p.add_argument("--preset", choices=["toy", "paper"])

    p = sub.add_parser("gen-data", help="generate the synthetic corpus + provider tables")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("--speakers", type=int)
    p.add_argument("--emotions", type=int)
    p.add_argument("--utts-per-cell", type=int, dest="utts_per_cell")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("cluster-match", help="cluster per speaker and align emotion ids")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_cluster_match)

    p = sub.add_parser("train", help="joint distillation + acoustic training")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--steps", type=int)
    p.add_argument("--w-dino", type=float, dest="w_dino")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--subset-file", dest="subset_file", help="train on listed utterance ids only")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="probes, similarity stats, plots, report")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out")
    p.add_argument("--force", action="store_true")
    p.add_argument("--synth-probe", type=int, default=0, dest="synth_probe")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("synth", help="synthesize a mel from phonemes + reference")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--speaker")
    p.add_argument("--ref-mel", dest="ref_mel")
    p.add_argument("--phonemes")
    p.add_argument("--out")
    p.add_argument("--batch", help="JSON file with a list of synth requests")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("plot", help="redraw the angle scatter from a cluster report")
    common(p)
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except LineageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EmodistillError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
