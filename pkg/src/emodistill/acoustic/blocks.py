"""Transformer blocks for the acoustic model.

``ConditionedFFTBlock`` is a feed-forward transformer block with an optional
style-injection branch: one multi-head cross-attention module whose weights
are shared across both style inputs attends from the hidden sequence to each
single-position condition (emotion, then speaker), the two attention outputs
are fused by a position-wise MLP, and the fused vector is added residually
through an output projection initialized to zero. At initialization the block
is therefore exactly a plain FFT block; conditioning grows in during training.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn

from emodistill.errors import CorpusError


def sinusoidal_table(max_len: int, dim: int) -> torch.Tensor:
    position = torch.arange(max_len, dtype=torch.float64)[:, None]
    div = torch.exp(
        torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim)
    )
    table = torch.zeros(max_len, dim, dtype=torch.float64)
    table[:, 0::2] = torch.sin(position * div)
    table[:, 1::2] = torch.cos(position * div[: (dim + 1) // 2])
    return table.float()


class ConvFeedForward(nn.Module):
    """Position-wise conv feed-forward with residual + layer norm."""

    def __init__(self, hidden: int, filter_size: int, kernel: int, dropout: float):
        super().__init__()
        self.conv1 = nn.Conv1d(hidden, filter_size, kernel, padding=(kernel - 1) // 2)
        self.conv2 = nn.Conv1d(filter_size, hidden, kernel, padding=(kernel - 1) // 2)
        self.norm = nn.LayerNorm(hidden)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x):
        y = self.conv2(torch.relu(self.conv1(x.transpose(1, 2)))).transpose(1, 2)
        return self.norm(x + self.dropout(y))


class ConditionedFFTBlock(nn.Module):
    def __init__(
        self,
        hidden: int,
        n_heads: int,
        filter_size: int,
        kernel: int,
        conditioned: bool = False,
        dropout: float = 0.1,
    ):
        super().__init__()
        self.attn = nn.MultiheadAttention(hidden, n_heads, dropout=dropout, batch_first=True)
        self.attn_norm = nn.LayerNorm(hidden)
        self.dropout = nn.Dropout(dropout)
        self.conditioned = conditioned
        if conditioned:
            # one attention module, applied once per condition: shared weights
            self.cond_attn = nn.MultiheadAttention(hidden, n_heads, batch_first=True)
            self.fuse = nn.Sequential(
                nn.Linear(2 * hidden, hidden), nn.GELU(), nn.Linear(hidden, hidden)
            )
            self.cond_out = nn.Linear(hidden, hidden)
            nn.init.zeros_(self.cond_out.weight)
            nn.init.zeros_(self.cond_out.bias)
        self.ffn = ConvFeedForward(hidden, filter_size, kernel, dropout)

    def forward(
        self,
        x: torch.Tensor,
        pad_mask: torch.Tensor | None = None,
        emotion: torch.Tensor | None = None,
        speaker: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """x [B, T, H]; pad_mask True at padded positions; conditions [B, H]."""
        if (emotion is None) != (speaker is None):
            raise CorpusError("emotion and speaker conditions must be supplied together")
        attn_out, _ = self.attn(x, x, x, key_padding_mask=pad_mask, need_weights=False)
        h = self.attn_norm(x + self.dropout(attn_out))
        if emotion is not None:
            if not self.conditioned:
                raise CorpusError("block was built without conditioning modules")
            if emotion.shape[-1] != h.shape[-1] or speaker.shape[-1] != h.shape[-1]:
                raise CorpusError("condition dimension does not match hidden size")
            emo_kv = emotion[:, None, :]
            spk_kv = speaker[:, None, :]
            attended_emo, _ = self.cond_attn(h, emo_kv, emo_kv, need_weights=False)
            attended_spk, _ = self.cond_attn(h, spk_kv, spk_kv, need_weights=False)
            fused = self.fuse(torch.cat([attended_emo, attended_spk], dim=-1))
            h = h + self.cond_out(fused)
        if pad_mask is not None:
            h = h.masked_fill(pad_mask[:, :, None], 0.0)
        out = self.ffn(h)
        if pad_mask is not None:
            out = out.masked_fill(pad_mask[:, :, None], 0.0)
        return out
