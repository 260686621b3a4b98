"""Distillation objective over multi-crop batches.

For every long crop l (teacher view) and every crop m != l (student view),
sum a cross-entropy between head distributions and a cosine distance between
encoder embeddings, averaged over the L * (N - 1) pairs. The exclusion is by
global crop index: a teacher view is never paired with the student view of
the same physical crop.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from emodistill.errors import CorpusError

_LOG_FLOOR = 1e-30


def dino_loss(
    h_t: torch.Tensor,
    h_s: torch.Tensor,
    e_t: torch.Tensor,
    e_s: torch.Tensor,
    long_indices: list[int],
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Returns (total, cross_entropy_part, cosine_part), each a scalar.

    ``h_t`` [L, K] and ``e_t`` [L, d] are teacher outputs for the long crops;
    ``h_s`` [N, K] and ``e_s`` [N, d] are student outputs for all crops;
    ``long_indices`` gives each teacher row's global crop index.
    """
    n_long, n_total = h_t.shape[0], h_s.shape[0]
    if n_long < 1:
        raise CorpusError("need at least one long crop")
    if n_total < 2:
        raise CorpusError("need at least two crops in total")
    if len(long_indices) != n_long or e_t.shape[0] != n_long or e_s.shape[0] != n_total:
        raise CorpusError("teacher/student batch sizes do not line up")
    if any(i < 0 or i >= n_total for i in long_indices):
        raise CorpusError("long crop index out of range")

    log_hs = torch.log(h_s.clamp_min(_LOG_FLOOR))
    ce = -(h_t @ log_hs.T)  # [L, N]
    cs = 1.0 - F.normalize(e_t, dim=-1, eps=1e-12) @ F.normalize(e_s, dim=-1, eps=1e-12).T

    pair = ce + cs
    keep = torch.ones_like(pair)
    rows = torch.arange(n_long, device=pair.device)
    cols = torch.as_tensor(long_indices, device=pair.device)
    keep[rows, cols] = 0.0

    denom = n_long * (n_total - 1)
    total = (pair * keep).sum() / denom
    ce_part = (ce * keep).sum() / denom
    cs_part = (cs * keep).sum() / denom
    return total, ce_part, cs_part
