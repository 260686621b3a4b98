import numpy as np
import pytest
import torch

from emodistill.dino import Distiller, DistillerConfig, dino_loss
from emodistill.errors import CorpusError, TrainingError
from gradcheck import max_relative_gradient_error

TINY = DistillerConfig(
    mel_dim=12,
    hidden=16,
    embed_dim=16,
    heads=2,
    head_hidden=24,
    head_bottleneck=8,
    prototypes=32,
    dropout=0.0,
)


@pytest.fixture()
def distiller():
    torch.manual_seed(0)
    return Distiller(TINY)


def _crops(rng, n, frames=9, mel_dim=12):
    return torch.tensor(rng.normal(size=(n, frames, mel_dim)), dtype=torch.float32)


def test_student_forward_shapes_and_normalization(distiller, rng):
    mel = _crops(rng, 30)
    e, h = distiller.student_forward(mel)
    assert e.shape == (30, TINY.embed_dim)
    assert h.shape == (30, TINY.prototypes)
    np.testing.assert_allclose(h.sum(dim=-1).detach().numpy(), 1.0, atol=1e-6)


def test_student_forward_zero_mel_finite(distiller):
    e, h = distiller.student_forward(torch.zeros(1, 7, 12))
    assert torch.isfinite(e).all()
    assert h.sum().item() == pytest.approx(1.0, abs=1e-6)


def test_identical_crops_identical_outputs(distiller, rng):
    distiller.eval()
    crop = _crops(rng, 1)
    e, h = distiller.student_forward(crop.repeat(2, 1, 1))
    np.testing.assert_array_equal(e[0].detach().numpy(), e[1].detach().numpy())
    np.testing.assert_array_equal(h[0].detach().numpy(), h[1].detach().numpy())


def test_mel_dim_mismatch_rejected(distiller, rng):
    with pytest.raises(CorpusError):
        distiller.student_forward(torch.zeros(1, 5, 13))


def test_teacher_rejects_short_crops(distiller, rng):
    with pytest.raises(CorpusError, match="long"):
        distiller.teacher_forward(_crops(rng, 3), flags=[True, False, True])


def test_teacher_sharpening_limit(distiller, rng):
    mel = _crops(rng, 4)
    _, h_sharp, logits = distiller.teacher_forward(mel, temperature=1e-4)
    # near-zero temperature approaches a one-hot argmax distribution
    centered = logits - distiller.center
    assert torch.equal(h_sharp.argmax(dim=-1), centered.argmax(dim=-1))
    assert h_sharp.max(dim=-1).values.min().item() > 0.999


def test_teacher_has_no_grad(distiller, rng):
    e, h, _ = distiller.teacher_forward(_crops(rng, 2))
    assert not e.requires_grad and not h.requires_grad
    for p in distiller.teacher_encoder.parameters():
        assert not p.requires_grad


def test_stop_gradient_through_loss(distiller, rng):
    mel = _crops(rng, 6)
    e_t, h_t, _ = distiller.teacher_forward(mel[:2])
    e_s, h_s = distiller.student_forward(mel)
    total, _, _ = dino_loss(h_t, h_s, e_t, e_s, [0, 1])
    total.backward()
    for p in distiller.teacher_encoder.parameters():
        assert p.grad is None
    for p in distiller.teacher_head.parameters():
        assert p.grad is None
    grads = [p.grad for p in distiller.student_encoder.parameters() if p.grad is not None]
    assert grads and any(g.abs().sum() > 0 for g in grads)


def test_ema_endpoints_and_scalar(distiller):
    with torch.no_grad():
        for p in distiller.student_encoder.parameters():
            p.zero_()
        for p in distiller.student_head.parameters():
            p.zero_()
        for p in distiller.teacher_encoder.parameters():
            p.fill_(1.0)
        for p in distiller.teacher_head.parameters():
            p.fill_(1.0)
    distiller.ema_update(1.0)
    assert all(torch.all(p == 1.0) for p in distiller.teacher_encoder.parameters())
    distiller.ema_update(0.996)
    assert all(
        torch.allclose(p, torch.full_like(p, 0.996)) for p in distiller.teacher_encoder.parameters()
    )
    distiller.ema_update(0.0)
    assert all(torch.all(p == 0.0) for p in distiller.teacher_encoder.parameters())


def test_ema_momentum_schedule(distiller):
    assert distiller.ema_momentum(0, 1000) == pytest.approx(0.996)
    assert distiller.ema_momentum(1000, 1000) == pytest.approx(1.0)
    mid = distiller.ema_momentum(500, 1000)
    assert 0.996 < mid < 1.0


def test_teacher_temperature_warmup(distiller):
    assert distiller.teacher_temperature(0, 100) == pytest.approx(0.02)
    assert distiller.teacher_temperature(10, 100) == pytest.approx(0.04)
    assert distiller.teacher_temperature(5, 100) == pytest.approx(0.03)


def test_center_update_fixed_point(distiller):
    c = torch.full((TINY.prototypes,), 2.5)
    distiller.center.copy_(torch.zeros(TINY.prototypes))
    cfg_m = distiller.config.center_momentum
    for _ in range(200):
        distiller.center_update(c.repeat(3, 1))
    np.testing.assert_allclose(distiller.center.numpy(), 2.5, atol=1e-4)


def test_center_update_identity_momentum(rng):
    torch.manual_seed(0)
    cfg = DistillerConfig(**{**TINY.__dict__, "center_momentum": 1.0})
    d = Distiller(cfg)
    before = d.center.clone()
    d.center_update(torch.tensor(rng.normal(size=(4, cfg.prototypes)), dtype=torch.float32))
    assert torch.equal(before, d.center)


def test_center_update_matches_recurrence_oracle(distiller, rng):
    from oracles import center_recurrence

    batches = [rng.normal(size=(5, TINY.prototypes)) for _ in range(7)]
    for b in batches:
        distiller.center_update(torch.tensor(b, dtype=torch.float32))
    expected = center_recurrence(np.zeros(TINY.prototypes), batches, TINY.center_momentum)
    np.testing.assert_allclose(distiller.center.numpy(), expected, atol=1e-6)


def test_embed_reference_deterministic(rng):
    torch.manual_seed(1)
    noisy = Distiller(DistillerConfig(**{**TINY.__dict__, "dropout": 0.5}))
    noisy.train()
    crop = _crops(rng, 1)
    a = noisy.embed_reference(crop)
    b = noisy.embed_reference(crop)
    np.testing.assert_array_equal(a.detach().numpy(), b.detach().numpy())
    assert noisy.student_encoder.training  # mode restored


def test_embed_reference_rejects_empty(distiller):
    with pytest.raises(CorpusError):
        distiller.embed_reference(torch.zeros(1, 0, 12))


def test_dino_gradients_match_finite_differences(rng):
    torch.manual_seed(3)
    cfg = DistillerConfig(
        mel_dim=8, hidden=16, embed_dim=64, heads=2, head_hidden=32, head_bottleneck=8,
        prototypes=24, dropout=0.0,
    )
    d = Distiller(cfg).double()
    d.eval()
    mel = torch.tensor(rng.normal(size=(4, 6, 8)), dtype=torch.float64)

    def loss_fn():
        e_t, h_t, _ = d.teacher_forward(mel[:2])
        e_s, h_s = d.student_forward(mel)
        total, _, _ = dino_loss(h_t, h_s, e_t, e_s, [0, 1])
        return total

    err = max_relative_gradient_error(loss_fn, d.parameters(), rng, n_entries=30)
    assert err < 1e-4


def test_anti_collapse_after_200_steps(rng):
    """DINO-only loop on separable toy data: teacher output keeps variance."""
    torch.manual_seed(7)
    d = Distiller(TINY)
    opt = torch.optim.AdamW(
        [p for p in d.parameters() if p.requires_grad], lr=5e-4, betas=(0.9, 0.98)
    )
    # two "emotions" with distinct mel statistics, random crops
    def make_batch(step_rng):
        emo = step_rng.integers(2)
        base = np.zeros((1, 12)) if emo == 0 else np.linspace(0, 3, 12)[None]
        mel = base + step_rng.normal(scale=0.3, size=(8, 9, 12))
        return torch.tensor(mel, dtype=torch.float32)

    total_steps = 200
    for step in range(total_steps):
        step_rng = np.random.default_rng([9, step])
        mel = make_batch(step_rng)
        tau = d.teacher_temperature(step, total_steps)
        e_t, h_t, logits = d.teacher_forward(mel[:2], temperature=tau)
        e_s, h_s = d.student_forward(mel)
        loss, _, _ = dino_loss(h_t, h_s, e_t, e_s, [0, 1])
        opt.zero_grad()
        loss.backward()
        opt.step()
        d.ema_update(d.ema_momentum(step, total_steps))
        d.center_update(logits)

    mel = make_batch(np.random.default_rng(123))
    _, h_t, _ = d.teacher_forward(mel[:2])
    assert h_t.std().item() > 1e-4
