import numpy as np
import pytest
import torch

from emodistill.dino import dino_loss
from emodistill.errors import CorpusError
from oracles import dino_loss_loops


def _softmax(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def test_cross_entropy_spot_value():
    h_t = torch.tensor([[1.0, 0.0]], dtype=torch.float64)
    h_s = torch.tensor([[0.5, 0.5], [0.5, 0.5]], dtype=torch.float64)
    e = torch.tensor([[1.0, 0.0]], dtype=torch.float64)
    e_s = torch.tensor([[1.0, 0.0], [1.0, 0.0]], dtype=torch.float64)
    # teacher crop is global index 0; only pair (l=0, m=1) survives
    total, ce, cs = dino_loss(h_t, h_s, e, e_s, long_indices=[0])
    assert ce.item() == pytest.approx(-np.log(0.5), abs=1e-6)
    assert cs.item() == pytest.approx(0.0, abs=1e-12)


def test_cosine_extremes():
    v = torch.tensor([[0.3, -1.2, 0.7]], dtype=torch.float64)
    h = torch.full((1, 4), 0.25, dtype=torch.float64)
    h_s = h.repeat(2, 1)
    total_same, _, cs_same = dino_loss(h, h_s, v, torch.cat([v, v]), long_indices=[0])
    assert cs_same.item() == pytest.approx(0.0, abs=1e-12)
    total_opp, _, cs_opp = dino_loss(h, h_s, v, torch.cat([v, -v]), long_indices=[0])
    assert cs_opp.item() == pytest.approx(2.0, abs=1e-12)


def test_matches_loop_oracle(rng):
    for _ in range(10):
        n_long, n_total, k, d = 2, 6, 16, 8
        h_t = _softmax(rng.normal(size=(n_long, k)))
        h_s = _softmax(rng.normal(size=(n_total, k)))
        e_t = rng.normal(size=(n_long, d))
        e_s = rng.normal(size=(n_total, d))
        long_idx = [0, 1]
        total, ce, cs = dino_loss(
            torch.tensor(h_t), torch.tensor(h_s), torch.tensor(e_t), torch.tensor(e_s), long_idx
        )
        o_total, o_ce, o_cs = dino_loss_loops(h_t, h_s, e_t, e_s, long_idx)
        assert total.item() == pytest.approx(o_total, rel=1e-6)
        assert ce.item() == pytest.approx(o_ce, rel=1e-6)
        assert cs.item() == pytest.approx(o_cs, rel=1e-6)


def test_loss_bounds(rng):
    for _ in range(10):
        h_t = torch.tensor(_softmax(rng.normal(size=(3, 8))))
        h_s = torch.tensor(_softmax(rng.normal(size=(7, 8))))
        e_t = torch.tensor(rng.normal(size=(3, 5)))
        e_s = torch.tensor(rng.normal(size=(7, 5)))
        total, ce, cs = dino_loss(h_t, h_s, e_t, e_s, [0, 1, 2])
        assert ce.item() >= 0.0
        assert 0.0 <= cs.item() <= 2.0
        assert total.item() >= 0.0


def test_shape_errors():
    h = torch.full((1, 4), 0.25)
    e = torch.ones(1, 3)
    with pytest.raises(CorpusError):
        dino_loss(h[:0], h, e[:0], e, [])  # no long crops
    with pytest.raises(CorpusError):
        dino_loss(h, h[:1], e, e[:1], [0])  # single crop in total
    with pytest.raises(CorpusError):
        dino_loss(h, h.repeat(3, 1), e, e.repeat(3, 1), [5])  # bad index
    with pytest.raises(CorpusError):
        dino_loss(h, h.repeat(3, 1), e.repeat(2, 1), e.repeat(3, 1), [0])  # e_t mismatch
