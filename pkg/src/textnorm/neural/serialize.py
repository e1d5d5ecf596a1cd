"""Model directory format: manifest.json describing ordered tensor records
plus weights.bin holding the concatenated little-endian float32 arrays."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
WEIGHTS_FILE = "weights.bin"
MANIFEST_FILE = "manifest.json"


def save_tensors(directory, named_arrays: list[tuple[str, np.ndarray]],
                 extra: dict | None = None) -> None:
    """Write manifest.json + weights.bin; ``extra`` keys are merged into
    the manifest (hyperparameters, vocabulary, ...)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records = []
    offset = 0
    with open(directory / WEIGHTS_FILE, "wb") as fh:
        for name, array in named_arrays:
            data = np.ascontiguousarray(array, dtype="<f4")
            raw = data.tobytes()
            records.append({
                "name": name,
                "shape": list(array.shape),
                "dtype": "f32",
                "byte_offset": offset,
                "byte_length": len(raw),
            })
            fh.write(raw)
            offset += len(raw)
    manifest = {"format_version": FORMAT_VERSION, **(extra or {}),
                "tensors": records}
    with open(directory / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=1)


def load_manifest(directory) -> dict:
    with open(Path(directory) / MANIFEST_FILE, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version "
                         f"{manifest.get('format_version')!r}")
    return manifest


def load_tensors(directory) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a model directory back into (manifest, name -> float32 array)."""
    directory = Path(directory)
    manifest = load_manifest(directory)
    blob = (directory / WEIGHTS_FILE).read_bytes()
    arrays: dict[str, np.ndarray] = {}
    for rec in manifest["tensors"]:
        if rec["dtype"] != "f32":
            raise ValueError(f"tensor {rec['name']}: unsupported dtype "
                             f"{rec['dtype']!r}")
        start, length = rec["byte_offset"], rec["byte_length"]
        flat = np.frombuffer(blob[start:start + length], dtype="<f4")
        arrays[rec["name"]] = flat.reshape(rec["shape"]).astype(np.float32)
    return manifest, arrays
