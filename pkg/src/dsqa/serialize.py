"""Versioned model files: numpy .npz with a format stamp, no pickling.

Layout: ``format_version`` and ``model_kind`` scalars, ``config`` as a JSON
string, arrays under their own keys, and string lists as fixed-width
unicode arrays prefixed ``str__``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """A model file has the wrong version or kind."""


def save_model(
    path: str | Path,
    kind: str,
    config: dict,
    arrays: dict[str, np.ndarray],
    strings: dict[str, list[str]] | None = None,
) -> None:
    payload: dict[str, np.ndarray] = {
        "format_version": np.array(FORMAT_VERSION, dtype=np.int64),
        "model_kind": np.array(kind),
        "config": np.array(json.dumps(config)),
    }
    for key, arr in arrays.items():
        payload[key] = np.asarray(arr)
    for key, values in (strings or {}).items():
        payload[f"str__{key}"] = np.array(values, dtype=np.str_)
    np.savez_compressed(path, **payload)


def load_model(
    path: str | Path, kind: str | None = None
) -> tuple[dict, dict[str, np.ndarray], dict[str, list[str]]]:
    """Returns (config, arrays, string lists); rejects version/kind mismatches."""
    with np.load(path, allow_pickle=False) as data:
        if "format_version" not in data:
            raise ModelFormatError(f"{path}: not a model file")
        version = int(data["format_version"])
        if version != FORMAT_VERSION:
            raise ModelFormatError(
                f"{path}: format version {version}, expected {FORMAT_VERSION}"
            )
        found_kind = str(data["model_kind"])
        if kind is not None and found_kind != kind:
            raise ModelFormatError(
                f"{path}: model kind {found_kind!r}, expected {kind!r}"
            )
        config = json.loads(str(data["config"]))
        arrays: dict[str, np.ndarray] = {}
        strings: dict[str, list[str]] = {}
        for key in data.files:
            if key in ("format_version", "model_kind", "config"):
                continue
            if key.startswith("str__"):
                strings[key[len("str__"):]] = [str(s) for s in data[key]]
            else:
                arrays[key] = data[key]
    return config, arrays, strings


def peek_kind(path: str | Path) -> str:
    """Model kind stored in a file, without loading parameter arrays."""
    with np.load(path, allow_pickle=False) as data:
        if "model_kind" not in data:
            raise ModelFormatError(f"{path}: not a model file")
        return str(data["model_kind"])
