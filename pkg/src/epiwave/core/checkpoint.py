"""Versioned JSON checkpoints of named float64 tensors."""
import json
from pathlib import Path

import numpy as np

FORMAT = "epiwave-params"
VERSION = 1


def dump_params(params: dict) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "tensors": {
            name: {"shape": list(arr.shape), "data": np.asarray(arr, dtype=np.float64).reshape(-1).tolist()}
            for name, arr in params.items()
        },
    }


def load_params_dict(doc: dict) -> dict:
    if doc.get("format") != FORMAT:
        raise ValueError(f"not a parameter checkpoint (format={doc.get('format')!r})")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    out = {}
    for name, t in doc["tensors"].items():
        data = np.asarray(t["data"], dtype=np.float64)
        shape = tuple(t["shape"])
        if data.size != int(np.prod(shape)):
            raise ValueError(f"tensor {name!r}: {data.size} values for shape {shape}")
        out[name] = data.reshape(shape)
    return out


def save_params(params: dict, path) -> None:
    Path(path).write_text(json.dumps(dump_params(params)))


def load_params(path) -> dict:
    return load_params_dict(json.loads(Path(path).read_text()))
