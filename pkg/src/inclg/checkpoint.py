"""Checkpoint archive handling.

A checkpoint is a single ``torch.save`` archive with top-level keys:

  format, format_version  identifies the archive type
  iteration               training iteration counter
  generator               generator state dict (hierarchical layer names)
  discriminator           discriminator state dict
  opt_g / opt_d           Adam optimizer states
  config                  flat snapshot of the TrainingConfig
  best_val                best validation score so far (or None)

Loading validates the expected top-level keys and, when restoring into an
existing model, every parameter key and shape.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import torch

from inclg.config import TrainingConfig

_REQUIRED_KEYS = {
    "format", "format_version", "iteration", "generator", "discriminator",
    "opt_g", "opt_d", "config", "best_val",
}
_FORMAT = "inclg-checkpoint"


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, *, iteration, generator, discriminator, opt_g, opt_d,
                    config: TrainingConfig, best_val=None) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": _FORMAT,
        "format_version": 1,
        "iteration": int(iteration),
        "generator": generator.state_dict(),
        "discriminator": discriminator.state_dict(),
        "opt_g": opt_g.state_dict(),
        "opt_d": opt_d.state_dict(),
        "config": config.to_dict(),
        "best_val": best_val,
    }
    torch.save(payload, path)


def load_checkpoint(path) -> dict:
    """Load and structurally validate a checkpoint archive."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:  # torch raises several types on corrupt archives
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != _FORMAT:
        raise CheckpointError(f"{path} is not a recognized checkpoint archive")
    missing = _REQUIRED_KEYS - set(payload)
    extra = set(payload) - _REQUIRED_KEYS
    if missing or extra:
        raise CheckpointError(
            f"checkpoint {path} has malformed structure: missing={sorted(missing)} "
            f"extra={sorted(extra)}")
    return payload


def load_state_into(module: torch.nn.Module, state: dict, what: str = "module") -> None:
    """Restore a state dict, reporting key or shape mismatches precisely."""
    expected = module.state_dict()
    missing = sorted(set(expected) - set(state))
    extra = sorted(set(state) - set(expected))
    if missing or extra:
        raise CheckpointError(
            f"{what} state keys differ: missing={missing[:5]} extra={extra[:5]}")
    for key in sorted(expected):
        if tuple(expected[key].shape) != tuple(state[key].shape):
            raise CheckpointError(
                f"{what} parameter {key!r} has shape {tuple(state[key].shape)} "
                f"in the checkpoint but {tuple(expected[key].shape)} in the model")
    module.load_state_dict(state)


def checkpoint_hash(path) -> str:
    """Short content hash identifying a checkpoint file."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()[:16]
