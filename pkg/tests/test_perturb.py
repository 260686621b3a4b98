import numpy as np
import pytest
import scipy.signal

from emodistill import audio
from emodistill.cluster.matching import PseudoLabelTable
from emodistill.errors import CorpusError, GeometryError
from emodistill.sampling import build_sampler, extract_crops, formant_perturb, perturb_batch

SR = 16000


def synth_vowel(f0=120.0, formant=1000.0, bw=100.0, seconds=2.0):
    """Independent test vowel: pulse train through one resonator."""
    n = int(SR * seconds)
    phase = np.cumsum(np.full(n, f0 / SR))
    x = np.zeros(n)
    x[np.diff(np.floor(phase), prepend=0.0) >= 1] = 1.0
    r = np.exp(-np.pi * bw / SR)
    theta = 2 * np.pi * formant / SR
    y = scipy.signal.lfilter([1 - r], [1.0, -2 * r * np.cos(theta), r * r], x)
    return (y / np.max(np.abs(y)) * 0.5).astype(np.float32)


def envelope_peak_hz(wave, lo=300.0, hi=3200.0):
    env = audio.spectral_envelope(wave)
    bins = np.arange(len(env)) * SR / audio.N_FFT
    sel = (bins > lo) & (bins < hi)
    return bins[sel][np.argmax(env[sel])]


def test_identity_ratio_is_near_lossless():
    x = synth_vowel()
    y = formant_perturb(x, 1.0)
    residual_db = 10 * np.log10(np.sum((y - x) ** 2) / np.sum(x**2))
    assert residual_db < -40.0


def test_formant_moves_by_ratio():
    bin_hz = SR / audio.N_FFT
    x = synth_vowel(formant=1000.0)
    y = formant_perturb(x, 1.2)
    assert abs(envelope_peak_hz(y) - 1200.0) <= bin_hz
    down = formant_perturb(x, 0.8)
    assert abs(envelope_peak_hz(down) - 800.0) <= bin_hz


def test_pitch_preserved():
    x = synth_vowel(f0=130.0)
    y = formant_perturb(x, 1.3)
    f_orig = audio.estimate_f0(x)
    f_pert = audio.estimate_f0(y)
    assert abs(f_pert - f_orig) / f_orig < 0.05


def test_length_preserved_exactly(rng):
    for n in (1000, 4096, 50_001):
        x = rng.normal(size=n).astype(np.float32) * 0.1
        assert len(formant_perturb(x, 1.17)) == n


def test_bad_ratio_rejected():
    with pytest.raises(GeometryError):
        formant_perturb(np.zeros(100, dtype=np.float32), 0.0)
    with pytest.raises(GeometryError):
        formant_perturb(np.zeros(100, dtype=np.float32), -1.2)


def test_silent_input_unchanged():
    x = np.zeros(5000, dtype=np.float32)
    np.testing.assert_array_equal(formant_perturb(x, 1.2), x)


def _batch_fixture(rng, n_utts=2):
    waves = {f"u{i}": synth_vowel(f0=110.0 + 10 * i, seconds=2.6) for i in range(n_utts)}
    mels = {k: audio.mel_spectrogram(v) for k, v in waves.items()}
    table = PseudoLabelTable(rows=[(k, "s00", 1) for k in waves])
    drawn = build_sampler(table, set_size=n_utts, seed=3).draw()
    batch = extract_crops(drawn, mels, n_long=1, n_short=1, long_frames=125, short_frames=94, rng=rng)
    return batch, waves


def test_perturb_batch_preserves_frames_and_flags(rng):
    batch, waves = _batch_fixture(rng)
    out = perturb_batch(batch, waves, rng=np.random.default_rng(5))
    assert [c.n_frames for c in out.crops] == [c.n_frames for c in batch.crops]
    assert [c.long for c in out.crops] == [c.long for c in batch.crops]
    assert [c.source_index for c in out.crops] == [c.source_index for c in batch.crops]


def test_perturb_batch_deterministic(rng):
    batch, waves = _batch_fixture(rng)
    a = perturb_batch(batch, waves, rng=np.random.default_rng(9))
    b = perturb_batch(batch, waves, rng=np.random.default_rng(9))
    for ca, cb in zip(a.crops, b.crops):
        np.testing.assert_array_equal(ca.mel, cb.mel)


def test_student_only_policy_keeps_long_crops(rng):
    batch, waves = _batch_fixture(rng)
    out = perturb_batch(batch, waves, rng=np.random.default_rng(5), policy="student_only")
    for orig, new in zip(batch.crops, out.crops):
        if orig.long:
            np.testing.assert_array_equal(orig.mel, new.mel)
        else:
            assert not np.array_equal(orig.mel, new.mel)


def test_all_crops_policy_changes_everything(rng):
    batch, waves = _batch_fixture(rng)
    out = perturb_batch(batch, waves, rng=np.random.default_rng(5), policy="all_crops")
    for orig, new in zip(batch.crops, out.crops):
        assert not np.array_equal(orig.mel, new.mel)


def test_missing_waveform_rejected(rng):
    batch, waves = _batch_fixture(rng)
    with pytest.raises(CorpusError, match="no waveform"):
        perturb_batch(batch, {}, rng=np.random.default_rng(5))


def test_unknown_policy_rejected(rng):
    batch, waves = _batch_fixture(rng)
    with pytest.raises(CorpusError, match="policy"):
        perturb_batch(batch, waves, rng=np.random.default_rng(5), policy="teacher_only")
