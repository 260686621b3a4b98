"""Non-autoregressive acoustic model: phoneme encoder, variance adaptor,
mel decoder, with style conditioning injected at one block of each stack.

Durations expand phoneme-level features to frame level (ground truth at
training time, predictions at inference); pitch and energy are predicted per
frame and added back as learned projections of the (normalized) scalars.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from emodistill.acoustic.blocks import ConditionedFFTBlock, sinusoidal_table
from emodistill.errors import ConfigError, CorpusError


@dataclass
class AcousticConfig:
    vocab_size: int = 13  # phoneme ids 1..12, 0 = padding
    n_speakers: int = 10
    n_mels: int = 80
    layers: int = 4
    hidden: int = 128
    filter_size: int = 512
    kernel: int = 9
    heads: int = 2
    cond_position: int = 3  # 1-based block index carrying the conditioning branch
    conditioned: bool = True
    condition_encoder: bool = True
    condition_decoder: bool = True
    emotion_dim: int = 128
    dropout: float = 0.1
    max_len: int = 2000

    def validate(self) -> None:
        if not 1 <= self.cond_position <= self.layers:
            raise ConfigError(
                f"cond_position must be in [1, {self.layers}], got {self.cond_position}"
            )

    @classmethod
    def paper(cls, **kw) -> "AcousticConfig":
        return cls(hidden=256, filter_size=1024, **kw)


class VariancePredictor(nn.Module):
    """Two conv layers + projection to one scalar per position."""

    def __init__(self, hidden: int, kernel: int = 3, dropout: float = 0.1):
        super().__init__()
        self.conv1 = nn.Conv1d(hidden, hidden, kernel, padding=(kernel - 1) // 2)
        self.norm1 = nn.LayerNorm(hidden)
        self.conv2 = nn.Conv1d(hidden, hidden, kernel, padding=(kernel - 1) // 2)
        self.norm2 = nn.LayerNorm(hidden)
        self.dropout = nn.Dropout(dropout)
        self.proj = nn.Linear(hidden, 1)

    def forward(self, x, pad_mask=None):
        y = torch.relu(self.conv1(x.transpose(1, 2))).transpose(1, 2)
        y = self.dropout(self.norm1(y))
        y = torch.relu(self.conv2(y.transpose(1, 2))).transpose(1, 2)
        y = self.dropout(self.norm2(y))
        out = self.proj(y).squeeze(-1)
        if pad_mask is not None:
            out = out.masked_fill(pad_mask, 0.0)
        return out


class LengthRegulator(nn.Module):
    def forward(
        self, x: torch.Tensor, durations: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Repeat each position by its duration; returns (expanded, frame lengths)."""
        lengths = durations.sum(dim=1)
        max_frames = int(lengths.max().item())
        out = x.new_zeros(x.shape[0], max_frames, x.shape[2])
        for b in range(x.shape[0]):
            expanded = torch.repeat_interleave(x[b], durations[b], dim=0)
            out[b, : expanded.shape[0]] = expanded
        return out, lengths


def _pad_mask_from_lengths(lengths: torch.Tensor, max_len: int) -> torch.Tensor:
    return torch.arange(max_len, device=lengths.device)[None, :] >= lengths[:, None]


class AcousticModel(nn.Module):
    def __init__(self, config: AcousticConfig):
        super().__init__()
        config.validate()
        self.config = config
        cfg = config
        self.phoneme_embed = nn.Embedding(cfg.vocab_size, cfg.hidden, padding_idx=0)
        self.register_buffer("pos_table", sinusoidal_table(cfg.max_len, cfg.hidden))
        self.speaker_table = nn.Embedding(cfg.n_speakers, cfg.hidden)
        if cfg.conditioned:
            self.emotion_proj = nn.Linear(cfg.emotion_dim, cfg.hidden)

        def build_stack(conditioned_stack: bool):
            blocks = []
            for i in range(cfg.layers):
                cond_here = (
                    cfg.conditioned and conditioned_stack and (i + 1) == cfg.cond_position
                )
                blocks.append(
                    ConditionedFFTBlock(
                        cfg.hidden, cfg.heads, cfg.filter_size, cfg.kernel, cond_here, cfg.dropout
                    )
                )
            return nn.ModuleList(blocks)

        self.encoder = build_stack(cfg.condition_encoder)
        self.decoder = build_stack(cfg.condition_decoder)
        self.duration_predictor = VariancePredictor(cfg.hidden, dropout=cfg.dropout)
        self.pitch_predictor = VariancePredictor(cfg.hidden, dropout=cfg.dropout)
        self.energy_predictor = VariancePredictor(cfg.hidden, dropout=cfg.dropout)
        self.pitch_proj = nn.Linear(1, cfg.hidden)
        self.energy_proj = nn.Linear(1, cfg.hidden)
        self.length_regulator = LengthRegulator()
        self.mel_out = nn.Linear(cfg.hidden, cfg.n_mels)

    def _run_stack(self, blocks, x, pad_mask, emotion, speaker):
        for block in blocks:
            if block.conditioned and emotion is not None:
                x = block(x, pad_mask, emotion=emotion, speaker=speaker)
            else:
                x = block(x, pad_mask)
        return x

    def forward(
        self,
        phonemes: torch.Tensor,
        phoneme_lengths: torch.Tensor,
        speaker_idx: torch.Tensor,
        emotion_embedding: torch.Tensor | None = None,
        durations: torch.Tensor | None = None,
        pitch_target: torch.Tensor | None = None,
        energy_target: torch.Tensor | None = None,
    ) -> dict:
        """Teacher-forced when targets are given, free-running otherwise.

        ``pitch_target``/``energy_target`` are frame-level, already normalized.
        Returns mel prediction plus log-duration / pitch / energy predictions
        and the masks the losses need.
        """
        if phonemes.numel() == 0 or int(phoneme_lengths.max()) == 0:
            raise CorpusError("empty phoneme sequence")
        if int(speaker_idx.max()) >= self.speaker_table.num_embeddings or int(speaker_idx.min()) < 0:
            raise CorpusError("speaker index out of range")
        cfg = self.config

        emotion = None
        speaker = None
        if cfg.conditioned and emotion_embedding is not None:
            emotion = self.emotion_proj(emotion_embedding)
            speaker = self.speaker_table(speaker_idx)
        elif cfg.conditioned and emotion_embedding is None:
            raise CorpusError("model is conditioned but no emotion embedding was given")

        src_mask = _pad_mask_from_lengths(phoneme_lengths, phonemes.shape[1])
        x = self.phoneme_embed(phonemes) + self.pos_table[: phonemes.shape[1]][None]
        x = x.masked_fill(src_mask[:, :, None], 0.0)
        x = self._run_stack(self.encoder, x, src_mask, emotion, speaker)

        log_dur_pred = self.duration_predictor(x, src_mask)
        if durations is None:
            durations = torch.clamp(
                torch.round(torch.exp(log_dur_pred) - 1.0), min=1.0
            ).long()
            durations = durations.masked_fill(src_mask, 0)

        frames, mel_lengths = self.length_regulator(x, durations)
        mel_mask = _pad_mask_from_lengths(mel_lengths, frames.shape[1])

        pitch_pred = self.pitch_predictor(frames, mel_mask)
        energy_pred = self.energy_predictor(frames, mel_mask)
        pitch_in = pitch_target if pitch_target is not None else pitch_pred
        energy_in = energy_target if energy_target is not None else energy_pred
        frames = frames + self.pitch_proj(pitch_in[:, :, None]) + self.energy_proj(
            energy_in[:, :, None]
        )
        frames = frames + self.pos_table[: frames.shape[1]][None]
        frames = frames.masked_fill(mel_mask[:, :, None], 0.0)

        frames = self._run_stack(self.decoder, frames, mel_mask, emotion, speaker)
        mel = self.mel_out(frames).masked_fill(mel_mask[:, :, None], 0.0)
        return {
            "mel": mel,
            "log_duration": log_dur_pred,
            "pitch": pitch_pred,
            "energy": energy_pred,
            "durations": durations,
            "mel_lengths": mel_lengths,
            "src_mask": src_mask,
            "mel_mask": mel_mask,
        }
