"""Parameter checkpoints.

A checkpoint is two files sharing a stem:

``<stem>.json``
    manifest: ``{"format": "gestauth-ckpt/1", "spec": <module spec>,
    "params": [{"name", "shape", "offset", "count"}...], "meta": {...}}``
``<stem>.bin``
    every parameter, in manifest order, as contiguous little-endian float64
    (C order). ``offset``/``count`` are in elements, not bytes.
"""

import json
from pathlib import Path

import numpy as np

FORMAT = "gestauth-ckpt/1"


def save_checkpoint(module, stem, meta=None):
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    entries, chunks, offset = [], [], 0
    for name, p in module.named_parameters():
        entries.append({"name": name, "shape": list(p.shape), "offset": offset, "count": int(p.size)})
        chunks.append(np.ascontiguousarray(p.data, dtype="<f8").reshape(-1))
        offset += p.size
    blob = np.concatenate(chunks) if chunks else np.zeros(0, dtype="<f8")
    manifest = {"format": FORMAT, "spec": module.to_spec(), "params": entries, "meta": meta or {}}
    stem.with_suffix(".json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    stem.with_suffix(".bin").write_bytes(blob.astype("<f8").tobytes())
    return stem.with_suffix(".json")


def read_checkpoint(stem):
    """Return (manifest, {name: array})."""
    stem = Path(stem)
    if stem.suffix in (".json", ".bin"):
        stem = stem.with_suffix("")
    manifest = json.loads(stem.with_suffix(".json").read_text())
    if manifest.get("format") != FORMAT:
        raise ValueError(f"{stem}: not a {FORMAT} checkpoint")
    blob = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f8")
    arrays = {}
    for e in manifest["params"]:
        arrays[e["name"]] = blob[e["offset"] : e["offset"] + e["count"]].reshape(e["shape"]).astype(np.float64)
    return manifest, arrays


def load_into(module, arrays):
    params = dict(module.named_parameters())
    missing = set(params) ^ set(arrays)
    if missing:
        raise ValueError(f"checkpoint/module parameter mismatch: {sorted(missing)[:5]}")
    for name, p in params.items():
        if tuple(arrays[name].shape) != p.shape:
            raise ValueError(f"shape mismatch for {name}: {arrays[name].shape} vs {p.shape}")
        p.data[...] = arrays[name]
    return module
