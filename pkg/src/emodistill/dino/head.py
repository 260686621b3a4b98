"""Projection head mapping style embeddings onto prototype logits."""

from __future__ import annotations

import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils.parametrizations import weight_norm


class ProjectionHead(nn.Module):
    """MLP -> L2-normalized bottleneck -> weight-normed prototype layer."""

    def __init__(
        self,
        in_dim: int = 128,
        hidden: int = 256,
        bottleneck: int = 64,
        n_prototypes: int = 1024,
    ):
        super().__init__()
        self.mlp = nn.Sequential(
            nn.Linear(in_dim, hidden),
            nn.GELU(),
            nn.Linear(hidden, hidden),
            nn.GELU(),
            nn.Linear(hidden, bottleneck),
        )
        self.prototypes = weight_norm(nn.Linear(bottleneck, n_prototypes, bias=False))

    def forward(self, embedding):
        x = self.mlp(embedding)
        x = F.normalize(x, dim=-1, eps=1e-12)
        return self.prototypes(x)
