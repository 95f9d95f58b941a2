"""Checkpoint directory format: a JSON `meta` file plus a flat `params` payload.

The payload is the concatenation of every parameter block as little-endian
32-bit floats, in exactly the block order the meta document declares. The
meta serialization is canonical (sorted keys, fixed separators), so saving,
loading, and saving again reproduces both files byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .errors import CheckpointError
from .models import DoubleAttentionModel, SingleAttentionModel

META_FILE = "meta"
PARAMS_FILE = "params"
FORMAT_VERSION = 1

_KINDS = {"single": SingleAttentionModel, "double": DoubleAttentionModel}
_PRECISIONS = {"float32": np.float32, "float64": np.float64}


def _meta_bytes(meta: dict) -> bytes:
    return (json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def _params_bytes(model) -> bytes:
    return b"".join(np.ascontiguousarray(t.data, dtype="<f4").tobytes()
                    for _, t in model.blocks())


def build_meta(model, *, seed: int, step_count: int, src_tokens, tgt_tokens,
               stage1_digest: str | None = None) -> dict:
    precision = "float64" if model.dtype == np.float64 else "float32"
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "blocks": [[name, list(t.shape)] for name, t in model.blocks()],
        "hyper": {"d": model.d, "n": model.n, "a": model.a, "r": model.r,
                  "v_src": model.v_src, "v_tgt": model.v_tgt},
        "precision": precision,
        "frozen": sorted(model.frozen),
        "seed": seed,
        "step_count": step_count,
        "src_tokens": list(src_tokens),
        "tgt_tokens": list(tgt_tokens),
        "stage1_digest": stage1_digest,
    }


def save_checkpoint(path, model, *, seed: int, step_count: int, src_tokens, tgt_tokens,
                    stage1_digest: str | None = None) -> dict:
    """Write `meta` and `params` under ``path``; returns the meta document."""
    meta = build_meta(model, seed=seed, step_count=step_count, src_tokens=src_tokens,
                      tgt_tokens=tgt_tokens, stage1_digest=stage1_digest)
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, META_FILE), "wb") as f:
        f.write(_meta_bytes(meta))
    with open(os.path.join(path, PARAMS_FILE), "wb") as f:
        f.write(_params_bytes(model))
    return meta


def _read(path, name: str) -> bytes:
    full = os.path.join(path, name)
    try:
        with open(full, "rb") as f:
            return f.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read {full}: {exc}") from exc


def load_checkpoint(path):
    """Rebuild the model stored under ``path``; returns (model, meta)."""
    raw_meta = _read(path, META_FILE)
    try:
        meta = json.loads(raw_meta.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: malformed meta document: {exc}") from exc
    if meta.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {meta.get('format_version')!r}")
    if meta.get("kind") not in _KINDS:
        raise CheckpointError(f"{path}: unknown model kind {meta.get('kind')!r}")
    if meta.get("precision") not in _PRECISIONS:
        raise CheckpointError(f"{path}: unknown precision {meta.get('precision')!r}")
    hyper = meta["hyper"]
    model = _KINDS[meta["kind"]].create(
        hyper["v_src"], hyper["v_tgt"], hyper["d"], hyper["n"], hyper["a"], hyper["r"],
        seed=0, dtype=_PRECISIONS[meta["precision"]],
    )
    declared = [[name, list(t.shape)] for name, t in model.blocks()]
    if declared != meta["blocks"]:
        raise CheckpointError(f"{path}: block layout does not match this model family")
    payload = _read(path, PARAMS_FILE)
    expected = sum(int(np.prod(shape)) for _, shape in meta["blocks"]) * 4
    if len(payload) != expected:
        raise CheckpointError(
            f"{path}: payload holds {len(payload)} bytes, expected {expected}"
        )
    offset = 0
    for _, tensor in model.blocks():
        count = tensor.size
        flat = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        tensor.data[...] = flat.reshape(tensor.shape).astype(tensor.dtype)
        offset += count * 4
    model.frozen = set(meta.get("frozen", []))
    return model, meta


def checkpoint_digest(path) -> str:
    """Content digest over the meta and parameter bytes."""
    h = hashlib.sha256()
    h.update(_read(path, META_FILE))
    h.update(_read(path, PARAMS_FILE))
    return h.hexdigest()
