"""Checkpoint serialization: JSON manifest plus raw tensor payload.

A checkpoint is two files sharing a stem: ``<stem>.json`` describing the
network spec, the observation-encoder version, hyperparameters, and the
name/shape/dtype/offset of every tensor; and ``<stem>.bin`` holding the
tensor bytes back to back, little-endian, in manifest order.  Round trips
are bit-exact.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .network import NetworkParams, NetworkSpec, _param_shapes

FORMAT_NAME = "sadrl-checkpoint-v1"

_DTYPE_CODES = {"float32": "<f4", "float64": "<f8"}


class CheckpointError(RuntimeError):
    """Raised for malformed, truncated, or incompatible checkpoint files."""


def params_checksum(params: NetworkParams) -> str:
    """Order-stable content hash of every tensor, for snapshot verification."""
    digest = hashlib.sha256()
    for name in sorted(params.tensors):
        digest.update(name.encode())
        data = params.tensors[name].data
        digest.update(np.ascontiguousarray(data).astype(data.dtype.newbyteorder("<")).tobytes())
    return digest.hexdigest()


def save_checkpoint(
    stem,
    params: NetworkParams,
    encoder_version: str,
    hyperparameters: dict | None = None,
) -> None:
    stem = Path(stem)
    spec = params.spec
    entries = []
    payload = bytearray()
    for name, tensor in params.tensors.items():
        data = np.ascontiguousarray(tensor.data)
        code = _DTYPE_CODES.get(data.dtype.name)
        if code is None:
            raise CheckpointError(f"unsupported tensor dtype {data.dtype} for {name}")
        raw = data.astype(code, copy=False).tobytes()
        entries.append({
            "name": name,
            "shape": list(data.shape),
            "dtype": data.dtype.name,
            "offset": len(payload),
            "bytes": len(raw),
        })
        payload.extend(raw)
    manifest = {
        "format": FORMAT_NAME,
        "encoder_version": encoder_version,
        "spec": {
            "input_dim": spec.input_dim,
            "num_actions": spec.num_actions,
            "hand_size": spec.hand_size,
            "hidden": spec.hidden,
            "aux": spec.aux,
        },
        "hyperparameters": hyperparameters or {},
        "checksum": params_checksum(params),
        "tensors": entries,
    }
    stem.with_suffix(".bin").write_bytes(bytes(payload))
    stem.with_suffix(".json").write_text(json.dumps(manifest, indent=1) + "\n")


def load_checkpoint(stem, expected_encoder_version: str | None = None):
    """Read a checkpoint; returns (params, manifest dict)."""
    stem = Path(stem)
    manifest_path = stem.with_suffix(".json")
    if not manifest_path.exists():
        raise CheckpointError(f"missing manifest {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as err:
        raise CheckpointError(f"unreadable manifest {manifest_path}: {err}") from err
    if manifest.get("format") != FORMAT_NAME:
        raise CheckpointError(f"unknown checkpoint format {manifest.get('format')!r}")
    if expected_encoder_version is not None:
        found = manifest.get("encoder_version")
        if found != expected_encoder_version:
            raise CheckpointError(
                f"encoder version mismatch: checkpoint {found!r}, build {expected_encoder_version!r}"
            )
    spec = NetworkSpec(**manifest["spec"])
    payload = stem.with_suffix(".bin").read_bytes()
    tensors: dict[str, Tensor] = {}
    for entry in manifest["tensors"]:
        code = _DTYPE_CODES.get(entry["dtype"])
        if code is None:
            raise CheckpointError(f"unsupported dtype {entry['dtype']} in manifest")
        raw = payload[entry["offset"] : entry["offset"] + entry["bytes"]]
        if len(raw) != entry["bytes"]:
            raise CheckpointError(f"payload truncated at tensor {entry['name']}")
        data = np.frombuffer(raw, dtype=code).astype(entry["dtype"]).reshape(entry["shape"])
        tensors[entry["name"]] = Tensor(data.copy(), requires_grad=True)
    expected = set(_param_shapes(spec))
    if set(tensors) != expected:
        raise CheckpointError("manifest tensor names do not match the declared spec")
    params = NetworkParams(spec, tensors)
    if manifest.get("checksum") != params_checksum(params):
        raise CheckpointError("checksum mismatch: payload does not match manifest")
    return params, manifest
