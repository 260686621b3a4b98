"""Central finite-difference gradient checking for torch models."""

import numpy as np
import torch


def max_relative_gradient_error(
    loss_fn, parameters, rng, n_entries=40, step=1e-6, floor=1e-6
) -> float:
    """Compare autograd gradients of ``loss_fn()`` against central differences.

    ``loss_fn`` must rebuild the loss from scratch on every call (the
    parameters are mutated in place between evaluations). Entries are sampled
    uniformly across all parameter tensors. The error for one entry is
    |analytic - numeric| / max(|analytic|, |numeric|, floor); run in double
    precision so the finite-difference noise stays far below the tolerance.
    """
    params = [p for p in parameters if p.requires_grad]
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = [p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p) for p in params]

    sizes = np.array([p.numel() for p in params])
    total = sizes.sum()
    picks = rng.choice(total, size=min(n_entries, total), replace=False)

    worst = 0.0
    with torch.no_grad():
        for flat_idx in picks:
            pi = int(np.searchsorted(np.cumsum(sizes), flat_idx, side="right"))
            local = int(flat_idx - (np.cumsum(sizes)[pi] - sizes[pi]))
            flat = params[pi].view(-1)
            orig = flat[local].item()
            flat[local] = orig + step
            hi = loss_fn().item()
            flat[local] = orig - step
            lo = loss_fn().item()
            flat[local] = orig
            numeric = (hi - lo) / (2 * step)
            a = analytic[pi].view(-1)[local].item()
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, err)
    return worst
