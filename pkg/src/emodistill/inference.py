"""Checkpoint loading and deterministic synthesis."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from emodistill.acoustic import AcousticConfig, AcousticModel
from emodistill.checkpoint import load_checkpoint, load_module
from emodistill.config import PipelineConfig
from emodistill.dino import Distiller, DistillerConfig
from emodistill.errors import CorpusError
from emodistill.training import NormStats, reference_crop


@dataclass
class Pipeline:
    distiller: Distiller
    acoustic: AcousticModel
    stats: NormStats
    speaker_ids: list[str]
    short_frames: int
    n_mels: int
    config_hash: str
    data_hash: str
    step: int

    def speaker_index(self, speaker_id: str) -> int:
        if speaker_id not in self.speaker_ids:
            raise CorpusError(
                f"unknown speaker {speaker_id!r}; trained speakers: {self.speaker_ids}"
            )
        return self.speaker_ids.index(speaker_id)

    @torch.no_grad()
    def embed_mel(self, mel: np.ndarray) -> np.ndarray:
        """Emotion embedding of one raw log-mel (first short-crop window)."""
        crop = self.stats.norm_mel(reference_crop(mel, self.short_frames))
        e = self.distiller.embed_reference(torch.from_numpy(crop[None]).float())
        return e[0].numpy()

    @torch.no_grad()
    def synthesize(self, phonemes: np.ndarray, speaker_id: str, reference_mel: np.ndarray) -> np.ndarray:
        """Mel synthesis with predicted durations; deterministic given inputs."""
        if len(phonemes) == 0:
            raise CorpusError("empty phoneme sequence")
        if reference_mel.ndim != 2 or reference_mel.shape[1] != self.n_mels:
            raise CorpusError(f"reference mel must be [T, {self.n_mels}]")
        self.distiller.eval()
        self.acoustic.eval()
        spk = torch.tensor([self.speaker_index(speaker_id)])
        emotion = None
        if self.acoustic.config.conditioned:
            crop = self.stats.norm_mel(reference_crop(reference_mel, self.short_frames))
            emotion = self.distiller.embed_reference(torch.from_numpy(crop[None]).float())
        out = self.acoustic(
            torch.from_numpy(np.asarray(phonemes, dtype=np.int64))[None],
            torch.tensor([len(phonemes)]),
            spk,
            emotion_embedding=emotion,
        )
        mel = out["mel"][0, : int(out["mel_lengths"][0])].numpy()
        return self.stats.denorm_mel(mel).astype(np.float32)


def config_to_models(config: PipelineConfig, n_mels: int, vocab_size: int, n_speakers: int):
    dcfg = config["dino"]
    acfg = config["acoustic"]
    distiller = Distiller(
        DistillerConfig(
            mel_dim=n_mels,
            hidden=dcfg["hidden"],
            embed_dim=dcfg["embed_dim"],
            heads=dcfg["heads"],
            head_hidden=dcfg["head_hidden"],
            head_bottleneck=dcfg["head_bottleneck"],
            prototypes=dcfg["prototypes"],
            tau_student=dcfg["tau_student"],
            tau_teacher=dcfg["tau_teacher"],
            tau_teacher_warmup=dcfg["tau_teacher_warmup"],
            warmup_frac=dcfg["warmup_frac"],
            center_momentum=dcfg["center_momentum"],
            ema_base=dcfg["ema_base"],
            ema_end=dcfg["ema_end"],
            dropout=dcfg["dropout"],
        )
    )
    acoustic = AcousticModel(
        AcousticConfig(
            vocab_size=vocab_size + 1,
            n_speakers=n_speakers,
            n_mels=n_mels,
            layers=acfg["layers"],
            hidden=acfg["hidden"],
            filter_size=acfg["filter_size"],
            kernel=acfg["kernel"],
            heads=acfg["heads"],
            cond_position=acfg["cond_position"],
            conditioned=acfg["conditioned"],
            condition_encoder=acfg["condition_encoder"],
            condition_decoder=acfg["condition_decoder"],
            emotion_dim=dcfg["embed_dim"],
            dropout=acfg["dropout"],
        )
    )
    return distiller, acoustic


def load_pipeline(ckpt_dir: str | Path, config: PipelineConfig) -> Pipeline:
    manifest, tensors = load_checkpoint(ckpt_dir)
    extra = manifest["extra"]
    distiller, acoustic = config_to_models(
        config, extra["n_mels"], extra["vocab_size"], len(extra["speaker_ids"])
    )
    load_module(distiller, tensors, "distiller")
    load_module(acoustic, tensors, "acoustic")
    distiller.eval()
    acoustic.eval()
    return Pipeline(
        distiller=distiller,
        acoustic=acoustic,
        stats=NormStats.from_dict(extra["stats"]),
        speaker_ids=list(extra["speaker_ids"]),
        short_frames=int(extra["short_frames"]),
        n_mels=int(extra["n_mels"]),
        config_hash=manifest["config_hash"],
        data_hash=extra.get("data_hash", ""),
        step=int(manifest["step"]),
    )
