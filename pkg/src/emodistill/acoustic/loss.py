"""Acoustic losses: masked L1 mel plus squared-error variance terms, with the
distillation loss folded in under a configurable weight."""

from __future__ import annotations

import torch

from emodistill.errors import CorpusError


def _masked_mean(err: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
    keep = (~pad_mask).float()
    while keep.ndim < err.ndim:
        keep = keep[..., None]
    total = (err * keep).sum()
    count = keep.expand_as(err).sum().clamp_min(1.0)
    return total / count


def acoustic_loss(pred: dict, batch: dict) -> dict:
    """Per-component losses; padded positions contribute exactly zero.

    ``batch`` needs mel / log_duration / pitch / energy targets (normalized)
    plus the padding masks returned by the model forward.
    """
    for key in ("mel", "log_duration", "pitch", "energy"):
        if key not in batch or batch[key] is None:
            raise CorpusError(f"missing target {key!r} in batch")
    mel_mask = pred["mel_mask"]
    src_mask = pred["src_mask"]
    mel_l1 = _masked_mean((pred["mel"] - batch["mel"]).abs(), mel_mask)
    dur = _masked_mean((pred["log_duration"] - batch["log_duration"]) ** 2, src_mask)
    pitch = _masked_mean((pred["pitch"] - batch["pitch"]) ** 2, mel_mask)
    energy = _masked_mean((pred["energy"] - batch["energy"]) ** 2, mel_mask)
    return {"mel": mel_l1, "duration": dur, "pitch": pitch, "energy": energy}


def total_loss(
    acoustic_terms: dict, dino_term: torch.Tensor | None = None, w_dino: float = 1.0
) -> tuple[torch.Tensor, dict]:
    """Sum of components; returns (total, components incl. the weighted dino term)."""
    components = {k: v for k, v in acoustic_terms.items()}
    total = acoustic_terms["mel"] + acoustic_terms["duration"] + acoustic_terms["pitch"] + (
        acoustic_terms["energy"]
    )
    if dino_term is not None and w_dino != 0.0:
        weighted = w_dino * dino_term
        components["dino"] = weighted
        total = total + weighted
    return total, components
