"""Mel-style encoder: one fixed-size style vector per mel crop.

Spectral FC stack, gated temporal convolutions, multi-head self-attention,
then masked temporal average pooling, so crops of different lengths map to
the same embedding space.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from emodistill.errors import CorpusError


def _lengths_to_mask(lengths: torch.Tensor, max_len: int) -> torch.Tensor:
    """True at padded positions, shape [B, max_len]."""
    idx = torch.arange(max_len, device=lengths.device)
    return idx[None, :] >= lengths[:, None]


class GatedConv(nn.Module):
    def __init__(self, hidden: int, kernel: int, dropout: float):
        super().__init__()
        self.conv = nn.Conv1d(hidden, 2 * hidden, kernel, padding=(kernel - 1) // 2)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x):
        # x: [B, T, H]
        y = self.conv(x.transpose(1, 2))
        y = nn.functional.glu(y, dim=1).transpose(1, 2)
        return x + self.dropout(y)


class MelStyleEncoder(nn.Module):
    def __init__(
        self,
        mel_dim: int = 80,
        hidden: int = 128,
        out_dim: int = 128,
        n_heads: int = 2,
        kernel: int = 5,
        dropout: float = 0.1,
    ):
        super().__init__()
        self.mel_dim = mel_dim
        self.out_dim = out_dim
        self.spectral = nn.Sequential(
            nn.Linear(mel_dim, hidden),
            nn.Mish(),
            nn.Dropout(dropout),
            nn.Linear(hidden, hidden),
            nn.Mish(),
            nn.Dropout(dropout),
        )
        self.temporal = nn.ModuleList(
            [GatedConv(hidden, kernel, dropout), GatedConv(hidden, kernel, dropout)]
        )
        self.attn = nn.MultiheadAttention(hidden, n_heads, dropout=dropout, batch_first=True)
        self.norm = nn.LayerNorm(hidden)
        self.fc = nn.Linear(hidden, out_dim)

    def forward(self, mel: torch.Tensor, lengths: torch.Tensor | None = None) -> torch.Tensor:
        """mel [B, T, mel_dim] (+ optional true lengths) -> [B, out_dim]."""
        if mel.ndim != 3 or mel.shape[-1] != self.mel_dim:
            raise CorpusError(
                f"expected mel of shape [B, T, {self.mel_dim}], got {tuple(mel.shape)}"
            )
        if mel.shape[1] == 0:
            raise CorpusError("zero-length crop")
        pad_mask = None
        if lengths is not None:
            pad_mask = _lengths_to_mask(lengths, mel.shape[1])
        x = self.spectral(mel)
        for layer in self.temporal:
            x = layer(x)
            if pad_mask is not None:
                x = x.masked_fill(pad_mask[:, :, None], 0.0)
        attn_out, _ = self.attn(x, x, x, key_padding_mask=pad_mask, need_weights=False)
        x = self.norm(x + attn_out)
        x = self.fc(x)
        if pad_mask is None:
            return x.mean(dim=1)
        keep = (~pad_mask).float()[:, :, None]
        return (x * keep).sum(dim=1) / keep.sum(dim=1).clamp_min(1.0)
