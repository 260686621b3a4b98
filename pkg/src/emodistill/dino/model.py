"""Student/teacher pair with centering, sharpening, and EMA updates.

The teacher mirrors the student's architecture, never receives gradients, and
tracks the student through an exponential moving average whose momentum rises
to 1 on a cosine schedule. Teacher head outputs are centered (running mean of
the logits) and sharpened (low temperature) before the softmax: together they
keep the prototype distribution from collapsing.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from emodistill.dino.encoder import MelStyleEncoder
from emodistill.dino.head import ProjectionHead
from emodistill.errors import CorpusError, TrainingError


@dataclass
class DistillerConfig:
    mel_dim: int = 80
    hidden: int = 128
    embed_dim: int = 128
    heads: int = 2
    head_hidden: int = 256
    head_bottleneck: int = 64
    prototypes: int = 1024
    tau_student: float = 0.1
    tau_teacher: float = 0.04
    tau_teacher_warmup: float = 0.02
    warmup_frac: float = 0.1
    center_momentum: float = 0.9
    ema_base: float = 0.996
    ema_end: float = 1.0
    dropout: float = 0.1


class Distiller(nn.Module):
    def __init__(self, config: DistillerConfig):
        super().__init__()
        self.config = config
        self.student_encoder = MelStyleEncoder(
            config.mel_dim, config.hidden, config.embed_dim, config.heads, dropout=config.dropout
        )
        self.student_head = ProjectionHead(
            config.embed_dim, config.head_hidden, config.head_bottleneck, config.prototypes
        )
        self.teacher_encoder = copy.deepcopy(self.student_encoder)
        self.teacher_head = copy.deepcopy(self.student_head)
        for param in self._teacher_parameters():
            param.requires_grad_(False)
        self.register_buffer("center", torch.zeros(config.prototypes))

    def _teacher_parameters(self):
        yield from self.teacher_encoder.parameters()
        yield from self.teacher_head.parameters()

    def _student_parameters(self):
        yield from self.student_encoder.parameters()
        yield from self.student_head.parameters()

    # -- schedules ---------------------------------------------------------

    def teacher_temperature(self, step: int, total_steps: int) -> float:
        warm = max(1, int(self.config.warmup_frac * total_steps))
        if step >= warm:
            return self.config.tau_teacher
        frac = step / warm
        return self.config.tau_teacher_warmup + frac * (
            self.config.tau_teacher - self.config.tau_teacher_warmup
        )

    def ema_momentum(self, step: int, total_steps: int) -> float:
        base, end = self.config.ema_base, self.config.ema_end
        t = min(max(step, 0), max(total_steps, 1)) / max(total_steps, 1)
        return end - (end - base) * (math.cos(math.pi * t) + 1.0) / 2.0

    # -- forward passes ----------------------------------------------------

    def student_forward(
        self, mel: torch.Tensor, lengths: torch.Tensor | None = None
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (embeddings, head distributions); rows of h sum to 1."""
        e = self.student_encoder(mel, lengths)
        h = F.softmax(self.student_head(e) / self.config.tau_student, dim=-1)
        return e, h

    @torch.no_grad()
    def teacher_forward(
        self,
        mel: torch.Tensor,
        flags: list[bool] | None = None,
        lengths: torch.Tensor | None = None,
        temperature: float | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Teacher pass over long crops; returns (embeddings, h, raw logits)."""
        if flags is not None and not all(flags):
            raise CorpusError("teacher inputs must all be long crops")
        tau = self.config.tau_teacher if temperature is None else temperature
        e = self.teacher_encoder(mel, lengths)
        logits = self.teacher_head(e)
        h = F.softmax((logits - self.center) / tau, dim=-1)
        return e, h, logits

    def embed_reference(self, mel: torch.Tensor, lengths: torch.Tensor | None = None) -> torch.Tensor:
        """Deterministic student-encoder forward (dropout off, grads kept)."""
        was_training = self.student_encoder.training
        self.student_encoder.eval()
        try:
            return self.student_encoder(mel, lengths)
        finally:
            self.student_encoder.train(was_training)

    # -- state updates -----------------------------------------------------

    @torch.no_grad()
    def ema_update(self, momentum: float) -> None:
        if not 0.0 <= momentum <= 1.0:
            raise TrainingError(f"EMA momentum must be in [0, 1], got {momentum}")
        for t_param, s_param in zip(self._teacher_parameters(), self._student_parameters()):
            if t_param.shape != s_param.shape:
                raise TrainingError("student/teacher parameter shapes diverged")
            t_param.mul_(momentum).add_(s_param.detach(), alpha=1.0 - momentum)

    @torch.no_grad()
    def center_update(self, teacher_logits: torch.Tensor) -> None:
        if teacher_logits.numel() == 0:
            raise TrainingError("cannot update centering from an empty batch")
        m = self.config.center_momentum
        self.center.mul_(m).add_(teacher_logits.mean(dim=0), alpha=1.0 - m)
