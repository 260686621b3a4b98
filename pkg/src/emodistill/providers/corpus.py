"""Synthetic corpus generator and on-disk corpus format.

Every utterance is a formant-filtered pulse train: the speaker profile fixes
the two formant frequencies and the base pitch, the emotion cell fixes pitch
and energy statistics (multipliers, vibrato, amplitude modulation, pitch
slope). Phoneme identity moves the formants around their speaker base, which
gives the acoustic model something to predict from phoneme ids.

Ground-truth emotion labels are recorded for every utterance but live in a
separate table (``gt.csv`` on disk): training code consumes only the manifest
and derived artifacts, the label table is read by evaluation probes and test
oracles.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.signal

from emodistill import audio
from emodistill.errors import CorpusError, MissingInputError

VOCAB_SIZE = 12  # phoneme ids 1..12; 0 is reserved for padding

# Per-emotion prosody: f0 multiplier, energy multiplier, vibrato rate (Hz),
# vibrato depth, amplitude-modulation rate (Hz), AM depth, pitch slope.
_EMOTION_PROSODY = np.array(
    [
        [1.00, 1.00, 0.0, 0.00, 0.0, 0.00, 0.00],
        [1.22, 1.70, 7.0, 0.03, 8.0, 0.50, -0.05],
        [1.38, 1.25, 5.5, 0.06, 3.5, 0.25, 0.08],
        [0.78, 0.55, 1.5, 0.02, 1.2, 0.35, -0.10],
        [1.55, 1.10, 3.0, 0.04, 5.5, 0.15, 0.25],
    ]
)

_F1_BW = 80.0
_F2_BW = 120.0
_BASE_RMS = 0.08


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    n_speakers: int
    n_emotions: int = 5
    utterances_per_cell: int = 20
    sample_rate: int = 16000
    seed: int = 0
    embed_dim: int = 192
    embed_separation: float = 4.0
    noise_scale: float = 0.1
    attr_noise_scale: float = 0.1
    n_mels: int = 80
    hop: int = 256
    n_fft: int = 1024

    def validate(self) -> None:
        if self.n_speakers < 1:
            raise CorpusError(f"n_speakers must be positive, got {self.n_speakers}")
        if self.n_emotions < 2:
            raise CorpusError(f"n_emotions must be >= 2, got {self.n_emotions}")
        if self.utterances_per_cell < 1:
            raise CorpusError(
                f"utterances_per_cell must be positive, got {self.utterances_per_cell}"
            )
        if self.sample_rate < 8000:
            raise CorpusError(f"sample_rate must be >= 8000 Hz, got {self.sample_rate}")
        if self.embed_dim < 1:
            raise CorpusError(f"embed_dim must be positive, got {self.embed_dim}")


@dataclass
class Utterance:
    utterance_id: str
    speaker_id: str
    wave: np.ndarray
    mel: np.ndarray
    phonemes: np.ndarray
    durations: np.ndarray
    pitch: np.ndarray
    energy: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.mel.shape[0]

    @property
    def n_samples(self) -> int:
        return len(self.wave)


@dataclass
class Corpus:
    spec: SyntheticCorpusSpec
    utterances: list[Utterance]
    ground_truth: dict[str, tuple[str, int]] = field(repr=False)

    def __len__(self) -> int:
        return len(self.utterances)

    def by_id(self, utterance_id: str) -> Utterance:
        for utt in self.utterances:
            if utt.utterance_id == utterance_id:
                return utt
        raise CorpusError(f"unknown utterance id {utterance_id!r}")


def attribute_directions(n_emotions: int, seed: int) -> np.ndarray:
    """Per-emotion attribute-space centers (arousal, valence, dominance).

    Emotion 0 is neutral and sits at the origin; the others are placed so the
    origin is interior to their span (a scaled tetrahedron once there are at
    least four non-neutral emotions).
    """
    dirs = [np.zeros(3)]
    tetra = np.array(
        [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
    ) * (0.6 / np.sqrt(3.0))
    k = n_emotions - 1
    if k == 1:
        dirs.append(np.array([0.6, 0.0, 0.0]))
    elif k == 2:
        dirs.append(np.array([0.6, 0.0, 0.0]))
        dirs.append(np.array([-0.6, 0.0, 0.0]))
    elif k == 3:
        for ang in (0.0, 2 * np.pi / 3, 4 * np.pi / 3):
            dirs.append(0.6 * np.array([np.cos(ang), np.sin(ang), 0.0]))
    else:
        dirs.extend(tetra)
        rng = np.random.default_rng([seed, 41])
        for _ in range(k - 4):
            v = rng.normal(size=3)
            dirs.append(0.6 * v / np.linalg.norm(v))
    return np.asarray(dirs)


def embedding_offsets(n_emotions: int, dim: int, separation: float, seed: int) -> np.ndarray:
    """Per-emotion displacement vectors in speaker-embedding space."""
    rng = np.random.default_rng([seed, 43])
    offs = np.zeros((n_emotions, dim))
    for i in range(1, n_emotions):
        v = rng.normal(size=dim)
        offs[i] = separation * v / np.linalg.norm(v)
    return offs


def speaker_profiles(n_speakers: int, seed: int) -> np.ndarray:
    """Per-speaker (f0_base, f1, f2) in Hz, spread collision-free."""
    rng = np.random.default_rng([seed, 47])
    span = max(n_speakers - 1, 1)
    f0 = 95.0 + 130.0 * rng.permutation(n_speakers) / span
    f1 = 480.0 + 340.0 * rng.permutation(n_speakers) / span
    f2 = 1350.0 + 900.0 * rng.permutation(n_speakers) / span
    return np.stack([f0, f1, f2], axis=1)


def emotion_prosody(n_emotions: int, seed: int) -> np.ndarray:
    rows = [_EMOTION_PROSODY[i % len(_EMOTION_PROSODY)] for i in range(min(n_emotions, 5))]
    rng = np.random.default_rng([seed, 53])
    for _ in range(n_emotions - 5):
        rows.append(
            np.array(
                [
                    rng.uniform(0.7, 1.6),
                    rng.uniform(0.5, 1.8),
                    rng.uniform(1.0, 8.0),
                    rng.uniform(0.01, 0.06),
                    rng.uniform(1.0, 8.0),
                    rng.uniform(0.1, 0.5),
                    rng.uniform(-0.25, 0.25),
                ]
            )
        )
    return np.asarray(rows)


def phoneme_formant_multipliers(seed: int) -> np.ndarray:
    """Per-phoneme (f1_mult, f2_mult) pairs, shape [VOCAB_SIZE + 1, 2]; row 0 unused."""
    rng = np.random.default_rng([seed, 59])
    mults = np.ones((VOCAB_SIZE + 1, 2))
    mults[1:, 0] = rng.uniform(0.72, 1.30, VOCAB_SIZE)
    mults[1:, 1] = rng.uniform(0.75, 1.35, VOCAB_SIZE)
    return mults


def _resonator_coeffs(freq: float, bw: float, sr: int):
    r = np.exp(-np.pi * bw / sr)
    theta = 2.0 * np.pi * freq / sr
    return np.array([1.0 - r]), np.array([1.0, -2.0 * r * np.cos(theta), r * r])


def _synth_wave(
    profile: np.ndarray,
    prosody: np.ndarray,
    phonemes: np.ndarray,
    durations: np.ndarray,
    phone_mults: np.ndarray,
    spec: SyntheticCorpusSpec,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Returns (wave, per-frame F0 in Hz)."""
    sr, hop = spec.sample_rate, spec.hop
    f0_base, f1_base, f2_base = profile
    f0_mult, en_mult, vib_rate, vib_depth, am_rate, am_depth, slope = prosody

    n_frames = int(durations.sum())
    n = n_frames * hop
    t = np.arange(n) / sr
    dur_sec = n / sr

    phone_f0_jitter = rng.uniform(0.97, 1.03, len(phonemes))
    phone_amp_jitter = rng.uniform(0.9, 1.1, len(phonemes))
    sample_phone = np.repeat(np.arange(len(phonemes)), durations * hop)

    f0 = (
        f0_base
        * f0_mult
        * (1.0 + slope * (t / dur_sec - 0.5))
        * (1.0 + vib_depth * np.sin(2.0 * np.pi * vib_rate * t))
        * phone_f0_jitter[sample_phone]
    )
    f0 = np.clip(f0, 50.0, sr / 4.0)

    phase = np.cumsum(f0 / sr)
    excitation = np.zeros(n)
    excitation[np.diff(np.floor(phase), prepend=0.0) >= 1.0] = 1.0

    wave = np.zeros(n)
    zi1 = np.zeros(2)
    zi2 = np.zeros(2)
    pos = 0
    for pid, dur in zip(phonemes, durations):
        seg = excitation[pos : pos + dur * hop]
        b1, a1 = _resonator_coeffs(f1_base * phone_mults[pid, 0], _F1_BW, sr)
        b2, a2 = _resonator_coeffs(f2_base * phone_mults[pid, 1], _F2_BW, sr)
        seg, zi1 = scipy.signal.lfilter(b1, a1, seg, zi=zi1)
        seg, zi2 = scipy.signal.lfilter(b2, a2, seg, zi=zi2)
        wave[pos : pos + dur * hop] = seg
        pos += dur * hop

    am = 1.0 - am_depth / 2.0 + (am_depth / 2.0) * np.sin(2.0 * np.pi * am_rate * t)
    rms = np.sqrt(np.mean(wave * wave))
    wave = wave / max(rms, 1e-9) * _BASE_RMS * en_mult * am * phone_amp_jitter[sample_phone]

    frame_centers = np.arange(n_frames) * hop + hop // 2
    return wave.astype(np.float32), f0[frame_centers].astype(np.float32)


def generate_corpus(spec: SyntheticCorpusSpec) -> Corpus:
    """Generate the synthetic corpus; bit-reproducible given the spec."""
    spec.validate()
    profiles = speaker_profiles(spec.n_speakers, spec.seed)
    prosody = emotion_prosody(spec.n_emotions, spec.seed)
    phone_mults = phoneme_formant_multipliers(spec.seed)

    utterances: list[Utterance] = []
    ground_truth: dict[str, tuple[str, int]] = {}
    for spk in range(spec.n_speakers):
        speaker_id = f"s{spk:02d}"
        count = 0
        for emo in range(spec.n_emotions):
            for _ in range(spec.utterances_per_cell):
                rng = np.random.default_rng([spec.seed, 17, spk, emo, count])
                n_phones = int(rng.integers(10, 15))
                phonemes = rng.integers(1, VOCAB_SIZE + 1, n_phones)
                durations = rng.integers(16, 27, n_phones)
                wave, pitch = _synth_wave(
                    profiles[spk], prosody[emo], phonemes, durations, phone_mults, spec, rng
                )
                utt_id = f"{speaker_id}_u{count:03d}"
                utterances.append(
                    Utterance(
                        utterance_id=utt_id,
                        speaker_id=speaker_id,
                        wave=wave,
                        mel=audio.mel_spectrogram(
                            wave, spec.sample_rate, spec.n_fft, spec.hop, spec.n_mels
                        ),
                        phonemes=phonemes.astype(np.int64),
                        durations=durations.astype(np.int64),
                        pitch=pitch,
                        energy=audio.frame_energy(wave, spec.hop),
                    )
                )
                ground_truth[utt_id] = (speaker_id, emo)
                count += 1
    return Corpus(spec=spec, utterances=utterances, ground_truth=ground_truth)


# ---------------------------------------------------------------------------
# on-disk format


def save_corpus(corpus: Corpus, outdir: str | Path, config_hash: str = "") -> Path:
    """Write manifest + payloads; returns the manifest path.

    Layout: ``manifest.json``, ``gt.csv``, and per-utterance raw little-endian
    float32 arrays under ``wav/`` and ``mel/`` plus phoneme/target JSON under
    ``phn/``.
    """
    outdir = Path(outdir)
    for sub in ("wav", "mel", "phn"):
        (outdir / sub).mkdir(parents=True, exist_ok=True)

    entries = []
    for utt in corpus.utterances:
        wav_path = f"wav/{utt.utterance_id}.f32"
        mel_path = f"mel/{utt.utterance_id}.f32"
        phn_path = f"phn/{utt.utterance_id}.json"
        (outdir / wav_path).write_bytes(utt.wave.astype("<f4").tobytes())
        (outdir / mel_path).write_bytes(utt.mel.astype("<f4").tobytes())
        (outdir / phn_path).write_text(
            json.dumps(
                {
                    "phonemes": utt.phonemes.tolist(),
                    "durations": utt.durations.tolist(),
                    "pitch": [round(float(v), 6) for v in utt.pitch],
                    "energy": [round(float(v), 8) for v in utt.energy],
                },
                sort_keys=True,
            )
        )
        entries.append(
            {
                "utterance_id": utt.utterance_id,
                "speaker_id": utt.speaker_id,
                "n_frames": int(utt.n_frames),
                "n_samples": int(utt.n_samples),
                "mel_path": mel_path,
                "wav_path": wav_path,
                "phoneme_path": phn_path,
            }
        )

    manifest = {
        "config_hash": config_hash,
        "sample_rate": corpus.spec.sample_rate,
        "hop": corpus.spec.hop,
        "n_fft": corpus.spec.n_fft,
        "n_mels": corpus.spec.n_mels,
        "vocab_size": VOCAB_SIZE,
        "n_speakers": corpus.spec.n_speakers,
        "n_emotions": corpus.spec.n_emotions,
        "seed": corpus.spec.seed,
        "utterances": entries,
    }
    manifest_path = outdir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=1))

    with open(outdir / "gt.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance_id", "speaker_id", "emotion_id"])
        for utt_id in sorted(corpus.ground_truth):
            speaker_id, emotion_id = corpus.ground_truth[utt_id]
            writer.writerow([utt_id, speaker_id, emotion_id])
    return manifest_path


def load_manifest(data_dir: str | Path) -> dict:
    path = Path(data_dir) / "manifest.json"
    if not path.exists():
        raise MissingInputError(f"missing corpus manifest: {path}")
    return json.loads(path.read_text())


def load_corpus(data_dir: str | Path) -> tuple[dict, list[Utterance]]:
    """Load manifest + all payloads eagerly. Ground truth is NOT loaded here."""
    data_dir = Path(data_dir)
    manifest = load_manifest(data_dir)
    n_mels = manifest["n_mels"]
    utterances = []
    for entry in manifest["utterances"]:
        wave = np.frombuffer((data_dir / entry["wav_path"]).read_bytes(), dtype="<f4")
        mel = np.frombuffer((data_dir / entry["mel_path"]).read_bytes(), dtype="<f4").reshape(
            entry["n_frames"], n_mels
        )
        phn = json.loads((data_dir / entry["phoneme_path"]).read_text())
        utterances.append(
            Utterance(
                utterance_id=entry["utterance_id"],
                speaker_id=entry["speaker_id"],
                wave=wave,
                mel=mel,
                phonemes=np.asarray(phn["phonemes"], dtype=np.int64),
                durations=np.asarray(phn["durations"], dtype=np.int64),
                pitch=np.asarray(phn["pitch"], dtype=np.float32),
                energy=np.asarray(phn["energy"], dtype=np.float32),
            )
        )
    return manifest, utterances


def load_ground_truth(data_dir: str | Path) -> dict[str, tuple[str, int]]:
    """Read the held-out label table. Only evaluation probes and tests call this."""
    path = Path(data_dir) / "gt.csv"
    if not path.exists():
        raise MissingInputError(f"missing ground-truth table: {path}")
    table = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            table[row["utterance_id"]] = (row["speaker_id"], int(row["emotion_id"]))
    return table
