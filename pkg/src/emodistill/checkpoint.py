"""Checkpoint format: a JSON manifest plus one flat blob of float32 tensors.

The manifest records step, config/lineage hashes, schedule state, and a name,
shape, offset entry per tensor; the blob holds the raw little-endian float32
data in manifest order. Torch state dicts round-trip through this format.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from emodistill.errors import MissingInputError

MANIFEST_NAME = "manifest.json"
WEIGHTS_NAME = "weights.bin"


def save_checkpoint(
    ckpt_dir: str | Path,
    step: int,
    tensors: dict[str, np.ndarray],
    config_hash: str,
    extra: dict | None = None,
) -> Path:
    ckpt_dir = Path(ckpt_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    with open(ckpt_dir / WEIGHTS_NAME, "wb") as fh:
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype="<f4")
            fh.write(arr.tobytes())
            entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
            offset += arr.size
    manifest = {
        "step": int(step),
        "config_hash": config_hash,
        "extra": extra or {},
        "tensors": entries,
    }
    path = ckpt_dir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1))
    return path


def load_checkpoint(ckpt_dir: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    ckpt_dir = Path(ckpt_dir)
    manifest_path = ckpt_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise MissingInputError(f"no checkpoint manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    blob = np.frombuffer((ckpt_dir / WEIGHTS_NAME).read_bytes(), dtype="<f4")
    tensors = {}
    for entry in manifest["tensors"]:
        size = int(np.prod(entry["shape"])) if entry["shape"] else 1
        chunk = blob[entry["offset"] : entry["offset"] + size]
        tensors[entry["name"]] = chunk.reshape(entry["shape"]).copy()
    return manifest, tensors


def module_tensors(module: torch.nn.Module, prefix: str) -> dict[str, np.ndarray]:
    return {
        f"{prefix}.{name}": value.detach().cpu().numpy()
        for name, value in module.state_dict().items()
    }


def load_module(module: torch.nn.Module, tensors: dict[str, np.ndarray], prefix: str) -> None:
    state = {}
    skip = len(prefix) + 1
    for name, value in tensors.items():
        if name.startswith(prefix + "."):
            state[name[skip:]] = torch.from_numpy(value.copy())
    module.load_state_dict(state)
