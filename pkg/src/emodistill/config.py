"""Pipeline configuration: defaults, TOML files, CLI overrides, hashing.

Config files are TOML with one table per pipeline stage. Unknown sections or
keys are rejected so typos cannot silently fall back to defaults. Every
artifact a command writes records the hash of the effective config that
produced it, which lets downstream commands refuse mixed lineages.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from emodistill.errors import ConfigError

DEFAULTS: dict[str, dict] = {
    "providers": {
        "n_speakers": 10,
        "n_emotions": 5,
        "utterances_per_cell": 20,
        "sample_rate": 16000,
        "seed": 1234,
        "embed_dim": 192,
        "embed_separation": 4.0,
        "noise_scale": 0.1,
        "attr_noise_scale": 0.1,
    },
    "cluster_match": {
        "clusters": 5,
        "normalize_embeddings": False,
        "kmeans_max_iter": 300,
        "kmeans_tol": 1e-6,
        "seed": 7,
        "max_rounds": 10,
    },
    "sampling_perturb": {
        "set_size": 5,
        "n_long": 2,
        "n_short": 4,
        "long_sec": 3.0,
        "short_sec": 2.0,
        "rho_min": 0.75,
        "rho_max": 1.4,
        "ip_policy": "all_crops",
    },
    "dino": {
        "mel_dim": 80,
        "hidden": 128,
        "embed_dim": 128,
        "heads": 2,
        "head_hidden": 256,
        "head_bottleneck": 64,
        "prototypes": 1024,
        "tau_student": 0.1,
        "tau_teacher": 0.04,
        "tau_teacher_warmup": 0.02,
        "warmup_frac": 0.1,
        "center_momentum": 0.9,
        "ema_base": 0.996,
        "ema_end": 1.0,
        "dropout": 0.1,
    },
    "acoustic": {
        "layers": 4,
        "hidden": 128,
        "filter_size": 512,
        "kernel": 9,
        "heads": 2,
        "cond_position": 3,
        "n_mels": 80,
        "conditioned": True,
        "condition_encoder": True,
        "condition_decoder": True,
        "dropout": 0.1,
    },
    "training": {
        "steps": 1000,
        "batch_size": 2,
        "lr": 5e-4,
        "beta1": 0.9,
        "beta2": 0.98,
        "weight_decay": 0.01,
        "grad_clip": 1.0,
        "w_dino": 1.0,
        "checkpoint_every": 500,
        "seed": 77,
    },
}

# Paper-scale acoustic/encoder sizes; the defaults above are the toy preset.
PAPER_PRESET = {
    "acoustic": {"hidden": 256, "filter_size": 1024},
    "dino": {"hidden": 256},
}


def _coerce(value: str, default):
    """Parse an override string to the type of the default it replaces."""
    if isinstance(default, bool):
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean from {value!r}")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


@dataclass
class PipelineConfig:
    sections: dict[str, dict] = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    @classmethod
    def default(cls) -> "PipelineConfig":
        return cls()

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                loaded = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}")
        cfg = cls()
        cfg._merge(loaded, origin=str(path))
        return cfg

    def _merge(self, loaded: dict, origin: str) -> None:
        for section, table in loaded.items():
            if section not in self.sections:
                raise ConfigError(f"{origin}: unknown section [{section}]")
            if not isinstance(table, dict):
                raise ConfigError(f"{origin}: [{section}] must be a table")
            for key, value in table.items():
                if key not in self.sections[section]:
                    raise ConfigError(f"{origin}: unknown key {section}.{key}")
                default = self.sections[section][key]
                if isinstance(default, bool) != isinstance(value, bool) or not isinstance(
                    value, type(default) if not isinstance(default, float) else (int, float)
                ):
                    raise ConfigError(
                        f"{origin}: {section}.{key} expects "
                        f"{type(default).__name__}, got {type(value).__name__}"
                    )
                self.sections[section][key] = float(value) if isinstance(default, float) else value

    def apply_overrides(self, pairs: list[str]) -> None:
        """Apply ``section.key=value`` strings, e.g. from repeated --set flags."""
        for pair in pairs:
            if "=" not in pair or "." not in pair.split("=", 1)[0]:
                raise ConfigError(f"override must look like section.key=value: {pair!r}")
            dotted, value = pair.split("=", 1)
            section, key = dotted.split(".", 1)
            if section not in self.sections or key not in self.sections[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            self.sections[section][key] = _coerce(value, self.sections[section][key])

    def apply_preset(self, name: str) -> None:
        if name == "toy":
            return
        if name != "paper":
            raise ConfigError(f"unknown preset {name!r} (expected toy or paper)")
        for section, table in PAPER_PRESET.items():
            self.sections[section].update(table)

    def hash(self) -> str:
        canon = json.dumps(self.sections, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def write(self, path: str | Path) -> None:
        """Serialize the effective config as TOML next to produced artifacts."""
        lines = [f"# config hash: {self.hash()}"]
        for section in sorted(self.sections):
            lines.append(f"\n[{section}]")
            for key in sorted(self.sections[section]):
                lines.append(f"{key} = {_toml_value(self.sections[section][key])}")
        Path(path).write_text("\n".join(lines) + "\n")


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return json.dumps(value)
