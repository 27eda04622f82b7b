"""Run manifests: config snapshot, input digests, and output paths.

A manifest pins everything a training run depends on; rerunning the same
command against inputs with matching digests reproduces the checkpoint
byte for byte.
"""

from __future__ import annotations

import hashlib
import json

from . import __version__
from .trainer import TrainConfig


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def config_snapshot(config: TrainConfig) -> dict:
    return {
        "policy": config.label,
        "epsilon": config.policy.epsilon,
        "switch_at": config.schedule.switch_at,
        "batch_size": config.batch_size,
        "total_instances": config.total_instances,
        "lr": config.lr,
        "beta1": config.beta1,
        "beta2": config.beta2,
        "eps_adam": config.eps_adam,
        "seed": config.seed,
        "n": config.n,
    }


def write_manifest(path, config: TrainConfig, inputs: dict[str, str], outputs: list[str]) -> None:
    """inputs maps a role name (e.g. "candidates") to its file path."""
    payload = {
        "artifact_version": __version__,
        "config": config_snapshot(config),
        "inputs": {
            name: {"path": str(p), "sha256": file_digest(p)} for name, p in inputs.items()
        },
        "outputs": [str(p) for p in outputs],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def verify_manifest_inputs(manifest: dict) -> list[str]:
    """Returns the role names whose current digest no longer matches."""
    stale = []
    for name, entry in manifest.get("inputs", {}).items():
        if file_digest(entry["path"]) != entry["sha256"]:
            stale.append(name)
    return stale
