"""Formant-based information perturbation.

Warps the spectral envelope along the frequency axis by a ratio while leaving
the excitation (pitch harmonics) and duration untouched: the envelope is
separated from each STFT frame by cepstral liftering, resampled in frequency,
recombined with the original excitation and phase, and resynthesized by
weighted overlap-add. Formant positions scale by the ratio, F0 does not.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import scipy.fft

from emodistill import audio
from emodistill.errors import CorpusError, GeometryError
from emodistill.sampling.crops import Crop, CropBatch

_SILENCE_PEAK = 1e-8
_LIFTER = 32  # quefrency cutoff in samples at 16 kHz; 2 ms keeps 2 formant bumps


def _warp_rows(env: np.ndarray, ratio: float) -> np.ndarray:
    """Linear-interpolated env'(f) = env(f / ratio) along the last axis."""
    n_bins = env.shape[1]
    src = np.arange(n_bins) / ratio
    lo = np.clip(np.floor(src).astype(int), 0, n_bins - 1)
    hi = np.clip(lo + 1, 0, n_bins - 1)
    frac = src - np.floor(src)
    return env[:, lo] * (1.0 - frac) + env[:, hi] * frac


def formant_perturb(
    wave: np.ndarray, ratio: float, n_fft: int = audio.N_FFT, hop: int = audio.HOP
) -> np.ndarray:
    """Scale the spectral envelope's frequency axis by ``ratio``; length preserved."""
    if not ratio > 0.0:
        raise GeometryError(f"perturbation ratio must be positive, got {ratio}")
    wave = np.asarray(wave)
    if not np.all(np.isfinite(wave)):
        raise GeometryError("non-finite samples in perturbation input")
    if len(wave) == 0 or np.max(np.abs(wave)) < _SILENCE_PEAK:
        return wave.copy()

    spec = audio.stft(wave, n_fft, hop)
    mag = np.abs(spec)
    phase = spec / np.maximum(mag, 1e-12)
    logmag = np.log(np.maximum(mag, 1e-10))

    cep = scipy.fft.irfft(logmag, n=n_fft, axis=1)
    keep = np.zeros(n_fft, dtype=cep.dtype)
    keep[:_LIFTER] = 1.0
    keep[-_LIFTER + 1 :] = 1.0
    envelope = scipy.fft.rfft(cep * keep, axis=1).real
    excitation = logmag - envelope

    warped = np.exp(_warp_rows(envelope, float(ratio)) + excitation)
    out = audio.istft(warped * phase, len(wave), n_fft, hop)
    return out.astype(wave.dtype)


def _cut_wave(wave: np.ndarray, crop: Crop, hop: int) -> np.ndarray:
    """Waveform segment matching a crop, mirroring its frame-domain padding."""
    left, right = crop.pad
    if left or right:
        core = wave[: (crop.n_frames - left - right) * hop]
        return np.pad(core, (left * hop, right * hop), mode="edge")
    start = crop.start_frame * hop
    return wave[start : start + crop.n_frames * hop]


def perturb_batch(
    batch: CropBatch,
    waves: dict[str, np.ndarray],
    rng: np.random.Generator,
    rho_min: float = 0.75,
    rho_max: float = 1.4,
    policy: str = "all_crops",
    sample_rate: int = audio.SAMPLE_RATE,
    n_fft: int = audio.N_FFT,
    hop: int = audio.HOP,
) -> CropBatch:
    """Independent ratio per crop; mels re-extracted from the perturbed audio.

    ``student_only`` leaves long crops untouched so the teacher (which sees
    only long crops) consumes clean views; ``all_crops`` perturbs everything.
    """
    if policy not in ("all_crops", "student_only"):
        raise CorpusError(f"unknown perturbation policy {policy!r}")
    out = []
    for crop in batch.crops:
        if policy == "student_only" and crop.long:
            out.append(crop)
            continue
        if crop.utterance_id not in waves:
            raise CorpusError(f"no waveform available for utterance {crop.utterance_id!r}")
        rho = float(rng.uniform(rho_min, rho_max))
        segment = _cut_wave(waves[crop.utterance_id], crop, hop)
        perturbed = formant_perturb(segment, rho, n_fft, hop)
        mel = audio.mel_spectrogram(perturbed, sample_rate, n_fft, hop, crop.mel.shape[1])
        out.append(replace(crop, mel=mel))
    return CropBatch(crops=out, emotion_id=batch.emotion_id)
