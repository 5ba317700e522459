"""Checkpoint format: ``<stem>.ckpt`` blob of little-endian float32 plus ``<stem>.manifest.json``.

The manifest holds the model config, optional dataset statistics and one
``{name, shape, dtype, byte_offset}`` entry per parameter.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import ModelConfig, TimeKanModel

_DTYPE = np.dtype("<f4")
FORMAT_VERSION = 1


def manifest_path(ckpt_path) -> Path:
    ckpt_path = Path(ckpt_path)
    return ckpt_path.with_name(ckpt_path.stem + ".manifest.json")


def save_checkpoint(path, model: TimeKanModel, data_stats: dict | None = None) -> Path:
    path = Path(path)
    entries = []
    chunks = []
    offset = 0
    for p in model.parameters():
        raw = np.ascontiguousarray(p.value, dtype=_DTYPE).tobytes()
        entries.append({"name": p.name, "shape": list(p.shape), "dtype": "float32", "byte_offset": offset})
        chunks.append(raw)
        offset += len(raw)
    path.write_bytes(b"".join(chunks))
    manifest = {
        "format_version": FORMAT_VERSION,
        "model_config": model.config.to_dict(),
        "data_stats": data_stats,
        "total_bytes": offset,
        "parameters": entries,
    }
    mpath = manifest_path(path)
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return mpath


def read_manifest(path) -> dict:
    mpath = manifest_path(path)
    if not mpath.is_file():
        raise ConfigError(f"checkpoint manifest not found: {mpath}")
    return json.loads(mpath.read_text())


def load_checkpoint(path, expected_config: ModelConfig | None = None) -> tuple[TimeKanModel, dict]:
    """Rebuild the model stored at ``path``; error if it disagrees with ``expected_config``."""
    path = Path(path)
    manifest = read_manifest(path)
    config = ModelConfig.from_dict(manifest["model_config"])
    if expected_config is not None:
        stored, wanted = config.to_dict(), expected_config.to_dict()
        # Seed only drives initialization; it does not change a trained model.
        diff = sorted(k for k in wanted if k != "seed" and stored.get(k) != wanted[k])
        if diff:
            detail = ", ".join(f"model.{k}: checkpoint={stored.get(k)!r} config={wanted[k]!r}" for k in diff)
            raise ConfigError(f"checkpoint/config mismatch: {detail}")
    if not path.is_file():
        raise ConfigError(f"checkpoint blob not found: {path}")
    blob = path.read_bytes()
    if len(blob) != manifest["total_bytes"]:
        raise ConfigError(f"{path}: expected {manifest['total_bytes']} bytes, found {len(blob)}")
    state = {}
    for entry in manifest["parameters"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype=_DTYPE, count=count, offset=entry["byte_offset"])
        state[entry["name"]] = arr.reshape(shape).astype(np.float64)
    model = TimeKanModel(config)
    model.load_state_dict(state)
    return model, manifest
