"""Joint training of the distilled emotion encoder and the acoustic model.

One optimizer drives the student encoder, the projection head, and the TTS
model; the teacher follows by EMA. Every step reseeds its RNGs from
(seed, step), so a resumed run replays the exact batch stream and metrics are
reproducible per machine.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from emodistill import audio
from emodistill.acoustic import AcousticConfig, AcousticModel, acoustic_loss, total_loss
from emodistill.checkpoint import load_checkpoint, load_module, module_tensors, save_checkpoint
from emodistill.cluster.matching import PseudoLabelTable
from emodistill.config import PipelineConfig
from emodistill.dino import Distiller, DistillerConfig, dino_loss
from emodistill.errors import CorpusError, LineageError, MissingInputError, TrainingError
from emodistill.providers.corpus import Utterance, load_corpus
from emodistill.sampling import ClusterSampler, extract_crops, perturb_batch, seconds_to_frames
from emodistill.sampling.crops import _pad_slice

METRIC_COLUMNS = [
    "step",
    "loss_total",
    "loss_mel",
    "loss_dur",
    "loss_pitch",
    "loss_energy",
    "loss_ce",
    "loss_cs",
    "center_norm",
    "teacher_entropy",
]

LOCK_NAME = ".lock"


@dataclass
class NormStats:
    mel_mean: float
    mel_std: float
    pitch_mean: float
    pitch_std: float
    energy_mean: float
    energy_std: float

    @classmethod
    def from_utterances(cls, utterances: list[Utterance]) -> "NormStats":
        mels = np.concatenate([u.mel.reshape(-1) for u in utterances])
        log_pitch = np.log(np.concatenate([u.pitch for u in utterances]))
        log_energy = np.log(np.maximum(np.concatenate([u.energy for u in utterances]), 1e-8))
        return cls(
            mel_mean=float(mels.mean()),
            mel_std=float(mels.std() + 1e-8),
            pitch_mean=float(log_pitch.mean()),
            pitch_std=float(log_pitch.std() + 1e-8),
            energy_mean=float(log_energy.mean()),
            energy_std=float(log_energy.std() + 1e-8),
        )

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: dict) -> "NormStats":
        return cls(**{k: float(v) for k, v in data.items()})

    def norm_mel(self, mel: np.ndarray) -> np.ndarray:
        return (mel - self.mel_mean) / self.mel_std

    def denorm_mel(self, mel: np.ndarray) -> np.ndarray:
        return mel * self.mel_std + self.mel_mean

    def norm_pitch(self, pitch: np.ndarray) -> np.ndarray:
        return (np.log(np.maximum(pitch, 1e-3)) - self.pitch_mean) / self.pitch_std

    def norm_energy(self, energy: np.ndarray) -> np.ndarray:
        return (np.log(np.maximum(energy, 1e-8)) - self.energy_mean) / self.energy_std


def _torch_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0] >> 1)


def reference_crop(mel: np.ndarray, frames: int) -> np.ndarray:
    """The fixed reference view: the first short-crop window of an utterance."""
    window, _ = _pad_slice(mel, 0, frames)
    return window


class JointTrainer:
    def __init__(
        self,
        config: PipelineConfig,
        data_dir: str | Path,
        ckpt_dir: str | Path,
        utterance_ids: list[str] | None = None,
    ):
        torch.set_flush_denormal(True)
        self.config = config
        self.data_dir = Path(data_dir)
        self.ckpt_dir = Path(ckpt_dir)
        self.manifest, utterances = load_corpus(self.data_dir)

        labels_path = self.data_dir / "pseudo_labels.csv"
        if not labels_path.exists():
            raise MissingInputError(f"missing pseudo-label table: {labels_path}")
        table = PseudoLabelTable.read_csv(labels_path)
        if utterance_ids is not None:
            keep = set(utterance_ids)
            utterances = [u for u in utterances if u.utterance_id in keep]
            table = PseudoLabelTable(rows=[r for r in table.rows if r[0] in keep])
            if not utterances:
                raise CorpusError("utterance subset is empty")
        self.utterances = utterances
        self.by_id = {u.utterance_id: u for u in utterances}
        self.table = table

        self.stats = NormStats.from_utterances(utterances)
        self.speaker_ids = sorted({u.speaker_id for u in utterances})
        self.speaker_index = {spk: i for i, spk in enumerate(self.speaker_ids)}

        scfg = config["sampling_perturb"]
        sr, hop = self.manifest["sample_rate"], self.manifest["hop"]
        self.long_frames = seconds_to_frames(scfg["long_sec"], sr, hop)
        self.short_frames = seconds_to_frames(scfg["short_sec"], sr, hop)
        self.sampler = ClusterSampler(table, set_size=scfg["set_size"], seed=0)

        dcfg = config["dino"]
        self.distiller = Distiller(
            DistillerConfig(
                mel_dim=self.manifest["n_mels"],
                hidden=dcfg["hidden"],
                embed_dim=dcfg["embed_dim"],
                heads=dcfg["heads"],
                head_hidden=dcfg["head_hidden"],
                head_bottleneck=dcfg["head_bottleneck"],
                prototypes=dcfg["prototypes"],
                tau_student=dcfg["tau_student"],
                tau_teacher=dcfg["tau_teacher"],
                tau_teacher_warmup=dcfg["tau_teacher_warmup"],
                warmup_frac=dcfg["warmup_frac"],
                center_momentum=dcfg["center_momentum"],
                ema_base=dcfg["ema_base"],
                ema_end=dcfg["ema_end"],
                dropout=dcfg["dropout"],
            )
        )
        acfg = config["acoustic"]
        self.acoustic = AcousticModel(
            AcousticConfig(
                vocab_size=self.manifest["vocab_size"] + 1,
                n_speakers=len(self.speaker_ids),
                n_mels=self.manifest["n_mels"],
                layers=acfg["layers"],
                hidden=acfg["hidden"],
                filter_size=acfg["filter_size"],
                kernel=acfg["kernel"],
                heads=acfg["heads"],
                cond_position=acfg["cond_position"],
                conditioned=acfg["conditioned"],
                condition_encoder=acfg["condition_encoder"],
                condition_decoder=acfg["condition_decoder"],
                emotion_dim=dcfg["embed_dim"],
                dropout=acfg["dropout"],
            )
        )
        tcfg = config["training"]
        self.total_steps = tcfg["steps"]
        self.w_dino = tcfg["w_dino"]
        self.seed = tcfg["seed"]
        trainable = [p for p in self._trainable_modules().parameters() if p.requires_grad]
        self.optimizer = torch.optim.AdamW(
            trainable,
            lr=tcfg["lr"],
            betas=(tcfg["beta1"], tcfg["beta2"]),
            weight_decay=tcfg["weight_decay"],
        )

    def _trainable_modules(self) -> torch.nn.ModuleList:
        return torch.nn.ModuleList([self.distiller, self.acoustic])

    # -- batches -------------------------------------------------------------

    def _tts_batch(self, rng: np.random.Generator) -> dict:
        batch_size = min(self.config["training"]["batch_size"], len(self.utterances))
        picks = rng.choice(len(self.utterances), size=batch_size, replace=False)
        utts = [self.utterances[i] for i in picks]
        max_p = max(len(u.phonemes) for u in utts)
        max_t = max(u.n_frames for u in utts)
        phonemes = torch.zeros(batch_size, max_p, dtype=torch.long)
        durations = torch.zeros(batch_size, max_p, dtype=torch.long)
        mel = torch.zeros(batch_size, max_t, self.manifest["n_mels"])
        pitch = torch.zeros(batch_size, max_t)
        energy = torch.zeros(batch_size, max_t)
        refs = np.zeros((batch_size, self.short_frames, self.manifest["n_mels"]), dtype=np.float32)
        for i, utt in enumerate(utts):
            n_p, n_t = len(utt.phonemes), utt.n_frames
            phonemes[i, :n_p] = torch.from_numpy(utt.phonemes)
            durations[i, :n_p] = torch.from_numpy(utt.durations)
            mel[i, :n_t] = torch.from_numpy(self.stats.norm_mel(utt.mel))
            pitch[i, :n_t] = torch.from_numpy(self.stats.norm_pitch(utt.pitch))
            energy[i, :n_t] = torch.from_numpy(self.stats.norm_energy(utt.energy))
            refs[i] = self.stats.norm_mel(reference_crop(utt.mel, self.short_frames))
        return {
            "phonemes": phonemes,
            "phoneme_lengths": torch.tensor([len(u.phonemes) for u in utts]),
            "speaker_idx": torch.tensor([self.speaker_index[u.speaker_id] for u in utts]),
            "durations": durations,
            "log_duration": torch.log(durations.float() + 1.0),
            "mel": mel,
            "pitch": pitch,
            "energy": energy,
            "reference": torch.from_numpy(refs),
        }

    def _dino_terms(self, rng: np.random.Generator, step: int):
        scfg = self.config["sampling_perturb"]
        self.sampler.rng = np.random.default_rng([self.seed, step, 2])
        drawn = self.sampler.draw()
        mels = {utt_id: self.by_id[utt_id].mel for utt_id in drawn.utterance_ids}
        batch = extract_crops(
            drawn,
            mels,
            n_long=scfg["n_long"],
            n_short=scfg["n_short"],
            long_frames=self.long_frames,
            short_frames=self.short_frames,
            rng=rng,
        )
        waves = {utt_id: self.by_id[utt_id].wave for utt_id in drawn.utterance_ids}
        batch = perturb_batch(
            batch,
            waves,
            rng=rng,
            rho_min=scfg["rho_min"],
            rho_max=scfg["rho_max"],
            policy=scfg["ip_policy"],
            sample_rate=self.manifest["sample_rate"],
            n_fft=self.manifest["n_fft"],
            hop=self.manifest["hop"],
        )

        long_idx = batch.long_indices
        short_idx = [i for i in range(batch.n_total) if i not in set(long_idx)]
        longs = torch.stack(
            [torch.from_numpy(self.stats.norm_mel(batch.crops[i].mel)) for i in long_idx]
        )
        shorts = torch.stack(
            [torch.from_numpy(self.stats.norm_mel(batch.crops[i].mel)) for i in short_idx]
        )
        tau = self.distiller.teacher_temperature(step, self.total_steps)
        e_t, h_t, logits_t = self.distiller.teacher_forward(longs, temperature=tau)
        e_long, h_long = self.distiller.student_forward(longs)
        e_short, h_short = self.distiller.student_forward(shorts)

        d_e, k = e_long.shape[1], h_long.shape[1]
        e_s = e_long.new_zeros(batch.n_total, d_e)
        h_s = h_long.new_zeros(batch.n_total, k)
        e_s[long_idx], h_s[long_idx] = e_long, h_long
        e_s[short_idx], h_s[short_idx] = e_short, h_short

        loss, ce_part, cs_part = dino_loss(h_t, h_s, e_t, e_s, long_idx)
        entropy = float((-h_t * torch.log(h_t.clamp_min(1e-30))).sum(dim=-1).mean())
        return loss, ce_part, cs_part, logits_t, entropy

    # -- steps ---------------------------------------------------------------

    def step(self, step_idx: int) -> dict:
        torch.manual_seed(_torch_seed(self.seed, step_idx))
        self.distiller.train()
        self.acoustic.train()

        tts = self._tts_batch(np.random.default_rng([self.seed, step_idx, 0]))
        emotion = None
        if self.acoustic.config.conditioned:
            emotion = self.distiller.embed_reference(tts["reference"])
        pred = self.acoustic(
            tts["phonemes"],
            tts["phoneme_lengths"],
            tts["speaker_idx"],
            emotion_embedding=emotion,
            durations=tts["durations"],
            pitch_target=tts["pitch"],
            energy_target=tts["energy"],
        )
        terms = acoustic_loss(pred, tts)

        metrics = {"loss_ce": 0.0, "loss_cs": 0.0, "teacher_entropy": 0.0}
        dino_term = None
        logits_t = None
        if self.w_dino != 0.0:
            rng = np.random.default_rng([self.seed, step_idx, 1])
            dino_term, ce_part, cs_part, logits_t, entropy = self._dino_terms(rng, step_idx)
            metrics["loss_ce"] = float(ce_part.detach())
            metrics["loss_cs"] = float(cs_part.detach())
            metrics["teacher_entropy"] = entropy

        loss, _ = total_loss(terms, dino_term=dino_term, w_dino=self.w_dino)
        self.optimizer.zero_grad()
        loss.backward()
        clip = self.config["training"]["grad_clip"]
        if clip > 0:
            torch.nn.utils.clip_grad_norm_(
                [p for p in self._trainable_modules().parameters() if p.requires_grad], clip
            )
        self.optimizer.step()
        if self.w_dino != 0.0:
            self.distiller.ema_update(self.distiller.ema_momentum(step_idx, self.total_steps))
            self.distiller.center_update(logits_t)

        metrics.update(
            step=step_idx,
            loss_total=float(loss.detach()),
            loss_mel=float(terms["mel"].detach()),
            loss_dur=float(terms["duration"].detach()),
            loss_pitch=float(terms["pitch"].detach()),
            loss_energy=float(terms["energy"].detach()),
            center_norm=float(self.distiller.center.norm()),
        )
        return metrics

    # -- persistence -----------------------------------------------------------

    def _checkpoint_tensors(self) -> dict[str, np.ndarray]:
        tensors = {}
        tensors.update(module_tensors(self.distiller, "distiller"))
        tensors.update(module_tensors(self.acoustic, "acoustic"))
        for gi, group in enumerate(self.optimizer.param_groups):
            for pi, param in enumerate(group["params"]):
                state = self.optimizer.state.get(param)
                if not state:
                    continue
                base = f"optim.{gi}.{pi}"
                tensors[f"{base}.step"] = np.asarray([float(state["step"])], dtype=np.float32)
                tensors[f"{base}.exp_avg"] = state["exp_avg"].detach().numpy()
                tensors[f"{base}.exp_avg_sq"] = state["exp_avg_sq"].detach().numpy()
        return tensors

    def save(self, step: int) -> None:
        extra = {
            "total_steps": self.total_steps,
            "data_hash": self.manifest.get("config_hash", ""),
            "stats": self.stats.to_dict(),
            "speaker_ids": self.speaker_ids,
            "short_frames": self.short_frames,
            "long_frames": self.long_frames,
            "n_mels": self.manifest["n_mels"],
            "vocab_size": self.manifest["vocab_size"],
            "schedule": {
                "tau_teacher": self.distiller.teacher_temperature(step, self.total_steps),
                "ema_momentum": self.distiller.ema_momentum(step, self.total_steps),
            },
        }
        save_checkpoint(
            self.ckpt_dir, step, self._checkpoint_tensors(), self.config.hash(), extra
        )

    def _restore(self) -> int:
        manifest, tensors = load_checkpoint(self.ckpt_dir)
        if manifest["config_hash"] != self.config.hash():
            raise LineageError(
                "checkpoint was produced under a different config "
                f"({manifest['config_hash']} != {self.config.hash()})"
            )
        load_module(self.distiller, tensors, "distiller")
        load_module(self.acoustic, tensors, "acoustic")
        for gi, group in enumerate(self.optimizer.param_groups):
            for pi, param in enumerate(group["params"]):
                base = f"optim.{gi}.{pi}"
                if f"{base}.exp_avg" not in tensors:
                    continue
                self.optimizer.state[param] = {
                    "step": torch.tensor(float(tensors[f"{base}.step"][0])),
                    "exp_avg": torch.from_numpy(tensors[f"{base}.exp_avg"].copy()),
                    "exp_avg_sq": torch.from_numpy(tensors[f"{base}.exp_avg_sq"].copy()),
                }
        return int(manifest["step"])

    # -- the loop --------------------------------------------------------------

    def train(self, resume: bool = False) -> Path:
        self.ckpt_dir.mkdir(parents=True, exist_ok=True)
        lock = self.ckpt_dir / LOCK_NAME
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise TrainingError(f"another trainer holds {lock}")
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)

        metrics_path = self.ckpt_dir / "metrics.csv"
        try:
            start = 0
            if resume:
                start = self._restore()
                if metrics_path.exists():
                    with open(metrics_path, newline="") as fh:
                        rows = [r for r in csv.reader(fh)][1:]
                    rows = [r for r in rows if int(r[0]) < start]
                    self._write_metrics(metrics_path, rows)
            if not metrics_path.exists():
                self._write_metrics(metrics_path, [])

            every = self.config["training"]["checkpoint_every"]
            with open(metrics_path, "a", newline="") as fh:
                writer = csv.writer(fh)
                for step_idx in range(start, self.total_steps):
                    metrics = self.step(step_idx)
                    writer.writerow([repr(metrics[c]) for c in METRIC_COLUMNS])
                    fh.flush()
                    done = step_idx + 1
                    if every > 0 and done % every == 0 and done < self.total_steps:
                        self.save(done)
            self.save(self.total_steps)
        finally:
            lock.unlink(missing_ok=True)
        return metrics_path

    @staticmethod
    def _write_metrics(path: Path, rows: list) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRIC_COLUMNS)
            writer.writerows(rows)
