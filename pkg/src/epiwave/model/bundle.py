"""Saving and loading trained models with everything needed to forecast."""
from __future__ import annotations

import json
from pathlib import Path

from ..core.checkpoint import load_params, save_params
from ..wmn import NormalizationStats
from .config import ModelConfig

SIDECAR_SUFFIX = ".meta.json"


def save_model(path, params: dict, cfg: ModelConfig, stats: NormalizationStats, symptoms, extra=None) -> Path:
    """Write parameters to ``path`` and a sidecar with config, stats and symptoms.

    ``symptoms`` are the selected symptom names in feature order.
    """
    path = Path(path)
    save_params(params, path)
    meta = {"model": cfg.to_dict(), "stats": stats.to_dict(), "symptoms": list(symptoms), "extra": extra or {}}
    sidecar = path.with_name(path.name + SIDECAR_SUFFIX)
    sidecar.write_text(json.dumps(meta, indent=1))
    return sidecar


def load_model(path):
    """Returns (params, ModelConfig, NormalizationStats, symptoms, extra)."""
    path = Path(path)
    sidecar = path.with_name(path.name + SIDECAR_SUFFIX)
    if not sidecar.exists():
        raise FileNotFoundError(f"missing model sidecar {sidecar}")
    meta = json.loads(sidecar.read_text())
    return (load_params(path), ModelConfig.from_dict(meta["model"]), NormalizationStats.from_dict(meta["stats"]),
            meta["symptoms"], meta.get("extra", {}))
