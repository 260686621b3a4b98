"""Shared signal processing: STFT, mel filterbank, frame-level features.

Frame bookkeeping convention: an utterance of ``n`` samples has exactly
``n // hop`` mel frames, so a crop of F frames corresponds to F * hop
waveform samples and mel extraction of that segment yields F frames again.
"""

from __future__ import annotations

import numpy as np
import scipy.fft

SAMPLE_RATE = 16000
N_FFT = 1024
HOP = 256
N_MELS = 80
FMIN = 0.0
FMAX = 8000.0


def frame_count(n_samples: int, hop: int = HOP) -> int:
    return n_samples // hop


def _frames(x: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    """Centered frames: frame t covers samples around t * hop (reflect-padded)."""
    pad = n_fft // 2
    xp = np.pad(x, (pad, pad), mode="reflect")
    n = 1 + (len(xp) - n_fft) // hop
    idx = np.arange(n_fft)[None, :] + hop * np.arange(n)[:, None]
    return xp[idx]


def stft(x: np.ndarray, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """Complex STFT, shape [frames, n_fft // 2 + 1]. Preserves float32/float64."""
    x = np.asarray(x)
    if x.dtype not in (np.float32, np.float64):
        x = x.astype(np.float64)
    window = np.hanning(n_fft).astype(x.dtype)
    return scipy.fft.rfft(_frames(x, n_fft, hop) * window, axis=1)


def istft(spec: np.ndarray, length: int, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """Weighted overlap-add inverse of :func:`stft`, trimmed to ``length``."""
    real_dtype = np.float32 if spec.dtype == np.complex64 else np.float64
    window = np.hanning(n_fft).astype(real_dtype)
    frames = scipy.fft.irfft(spec, n=n_fft, axis=1) * window
    pad = n_fft // 2
    n_frames = spec.shape[0]
    out = np.zeros((n_frames - 1) * hop + n_fft, dtype=real_dtype)
    wsum = np.zeros_like(out)
    w2 = window * window
    if n_fft % hop == 0:
        # overlap-add in n_fft//hop strided passes instead of one per frame
        for k in range(n_fft // hop):
            chunk = frames[:, k * hop : (k + 1) * hop].reshape(-1)
            out[k * hop : k * hop + n_frames * hop] += chunk
            wsum[k * hop : k * hop + n_frames * hop] += np.tile(w2[k * hop : (k + 1) * hop], n_frames)
    else:
        for t in range(n_frames):
            out[t * hop : t * hop + n_fft] += frames[t]
            wsum[t * hop : t * hop + n_fft] += w2
    out /= np.maximum(wsum, 1e-8)
    return out[pad : pad + length]


def mel_filterbank(
    sr: int = SAMPLE_RATE,
    n_fft: int = N_FFT,
    n_mels: int = N_MELS,
    fmin: float = FMIN,
    fmax: float = FMAX,
) -> np.ndarray:
    """Triangular mel filterbank, shape [n_mels, n_fft // 2 + 1]."""

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    mel_pts = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    bins = np.fft.rfftfreq(n_fft, d=1.0 / sr)
    fb = np.zeros((n_mels, len(bins)))
    for i in range(n_mels):
        lo, mid, hi = hz_pts[i : i + 3]
        up = (bins - lo) / max(mid - lo, 1e-9)
        down = (hi - bins) / max(hi - mid, 1e-9)
        fb[i] = np.maximum(0.0, np.minimum(up, down))
    return fb


_FB_CACHE: dict[tuple, np.ndarray] = {}


def mel_spectrogram(
    x: np.ndarray,
    sr: int = SAMPLE_RATE,
    n_fft: int = N_FFT,
    hop: int = HOP,
    n_mels: int = N_MELS,
) -> np.ndarray:
    """Log-mel spectrogram, shape [n_samples // hop, n_mels], float32."""
    key = (sr, n_fft, n_mels)
    if key not in _FB_CACHE:
        _FB_CACHE[key] = mel_filterbank(sr, n_fft, n_mels)
    n_frames = frame_count(len(x), hop)
    power = np.abs(stft(x, n_fft, hop)[:n_frames]) ** 2
    mel = power @ _FB_CACHE[key].T
    return np.log(np.maximum(mel, 1e-10)).astype(np.float32)


def frame_energy(x: np.ndarray, hop: int = HOP) -> np.ndarray:
    """Per-frame RMS over non-overlapping hop-sized blocks, float32."""
    n = frame_count(len(x), hop)
    blocks = np.asarray(x[: n * hop], dtype=np.float64).reshape(n, hop)
    return np.sqrt(np.mean(blocks * blocks, axis=1)).astype(np.float32)


def estimate_f0(
    x: np.ndarray, sr: int = SAMPLE_RATE, fmin: float = 50.0, fmax: float = 420.0
) -> float:
    """Single autocorrelation-based F0 estimate for a quasi-stationary segment."""
    x = np.asarray(x, dtype=np.float64)
    x = x - x.mean()
    if not np.any(x):
        return 0.0
    # widen impulses so fractional-period pulse trains still correlate at lag 1T
    taper = np.hanning(max(5, int(sr / 1000.0)))
    x = np.convolve(x, taper / taper.sum(), mode="same")
    ac = np.correlate(x, x, mode="full")[len(x) - 1 :]
    lag_lo = max(2, int(sr / fmax))
    lag_hi = min(len(ac) - 2, int(sr / fmin))
    if lag_hi <= lag_lo:
        return 0.0
    window = ac[lag_lo:lag_hi]
    peak = window.max()
    if peak <= 0:
        return 0.0
    # prefer the smallest near-maximal local peak: integer multiples of the
    # true period score almost as high as the period itself
    local_max = np.r_[window[:-1] >= window[1:], True] & np.r_[True, window[1:] >= window[:-1]]
    candidates = np.flatnonzero(local_max & (window >= 0.9 * peak))
    lag = lag_lo + int(candidates[0] if len(candidates) else np.argmax(window))
    # parabolic refinement for sub-sample period accuracy
    a, b, c = ac[lag - 1], ac[lag], ac[lag + 1]
    denom = a - 2.0 * b + c
    shift = 0.5 * (a - c) / denom if abs(denom) > 1e-12 else 0.0
    return sr / (lag + float(np.clip(shift, -0.5, 0.5)))


def spectral_envelope(
    x: np.ndarray, n_fft: int = N_FFT, hop: int = HOP, lifter: int = 32
) -> np.ndarray:
    """Time-averaged log spectral envelope via cepstral liftering.

    Used as the measurement side of formant checks: returns the mean smooth
    log envelope over frames, shape [n_fft // 2 + 1].
    """
    logmag = np.log(np.maximum(np.abs(stft(x, n_fft, hop)), 1e-10))
    cep = np.fft.irfft(logmag, n=n_fft, axis=1)
    keep = np.zeros(n_fft)
    keep[:lifter] = 1.0
    keep[-lifter + 1 :] = 1.0
    env = np.fft.rfft(cep * keep, axis=1).real
    return env.mean(axis=0)
