"""Versioned named-tensor checkpoints.

File layout: an ASCII manifest followed by the raw payload::

    SPCKPT <version>
    stage <tag>
    config <json>
    meta <json>
    tensor <name> <dim>x<dim>... <count>     (one line per tensor, payload order)
    payload_sha256 <hex>
    end
    <float64 little-endian values of every tensor, concatenated, row-major>

A rank-0 tensor is written with shape ``-``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics.module import Module

FORMAT_VERSION = 1
MAGIC = "SPCKPT"


class CheckpointError(ValueError):
    """Unreadable, truncated, corrupted or incompatible checkpoint."""


class ShapeMismatchError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    stage: str
    config: dict
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION


def _shape_str(shape: tuple[int, ...]) -> str:
    return "x".join(map(str, shape)) if shape else "-"


def to_bytes(ckpt: Checkpoint) -> bytes:
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in ckpt.tensors.values())
    lines = [
        f"{MAGIC} {ckpt.version}",
        f"stage {ckpt.stage}",
        "config " + json.dumps(ckpt.config, sort_keys=True),
        "meta " + json.dumps(ckpt.meta, sort_keys=True),
    ]
    for name, arr in ckpt.tensors.items():
        if " " in name:
            raise CheckpointError(f"tensor name may not contain spaces: {name!r}")
        lines.append(f"tensor {name} {_shape_str(arr.shape)} {arr.size}")
    lines.append("payload_sha256 " + hashlib.sha256(payload).hexdigest())
    lines.append("end")
    return ("\n".join(lines) + "\n").encode("ascii") + payload


def from_bytes(raw: bytes) -> Checkpoint:
    end = raw.find(b"\nend\n")
    if end < 0:
        raise CheckpointError("checkpoint: manifest terminator not found")
    lines = raw[:end].decode("ascii").split("\n")
    magic, _, version = lines[0].partition(" ")
    if magic != MAGIC:
        raise CheckpointError(f"checkpoint: bad magic {magic!r}")
    if version != str(FORMAT_VERSION):
        raise CheckpointError(f"checkpoint: format version {version} not supported (expected {FORMAT_VERSION})")
    stage = config = meta = digest = None
    specs: list[tuple[str, tuple[int, ...], int]] = []
    for line in lines[1:]:
        key, _, rest = line.partition(" ")
        if key == "stage":
            stage = rest
        elif key == "config":
            config = json.loads(rest)
        elif key == "meta":
            meta = json.loads(rest)
        elif key == "tensor":
            name, shape_s, count = rest.split(" ")
            shape = () if shape_s == "-" else tuple(int(d) for d in shape_s.split("x"))
            if int(np.prod(shape, dtype=np.int64)) != int(count):
                raise CheckpointError(f"checkpoint: manifest shape/count disagree for {name!r}")
            specs.append((name, shape, int(count)))
        elif key == "payload_sha256":
            digest = rest
        else:
            raise CheckpointError(f"checkpoint: unknown manifest line {key!r}")
    if stage is None or config is None or meta is None or digest is None:
        raise CheckpointError("checkpoint: incomplete manifest")
    payload = raw[end + len(b"\nend\n"):]
    expected = 8 * sum(c for _, _, c in specs)
    if len(payload) != expected:
        raise CheckpointError(
            f"checkpoint: payload is {len(payload)} bytes, manifest declares {expected} (truncated or padded)")
    if hashlib.sha256(payload).hexdigest() != digest:
        raise CheckpointError("checkpoint: payload checksum mismatch")
    tensors = {}
    offset = 0
    for name, shape, count in specs:
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        tensors[name] = arr.astype(np.float64).reshape(shape)
        offset += 8 * count
    return Checkpoint(stage=stage, config=config, tensors=tensors, meta=meta, version=FORMAT_VERSION)


def save_checkpoint(ckpt: Checkpoint, path: Path) -> None:
    Path(path).write_bytes(to_bytes(ckpt))


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return from_bytes(path.read_bytes())


def module_tensors(module: Module, prefix: str = "param.") -> dict[str, np.ndarray]:
    return {prefix + name: p.data.copy() for name, p in module.named_parameters()}


def load_module(module: Module, ckpt: Checkpoint, prefix: str = "param.") -> None:
    """Copy checkpoint tensors into ``module``; every parameter must be present with its shape."""
    params = module.parameters()
    for name, p in params.items():
        key = prefix + name
        if key not in ckpt.tensors:
            raise CheckpointError(f"checkpoint ({ckpt.stage}) has no tensor {key!r}")
        arr = ckpt.tensors[key]
        if arr.shape != p.shape:
            raise ShapeMismatchError(
                f"tensor {key!r}: checkpoint shape {arr.shape} != model shape {p.shape}")
    for name, p in params.items():
        p.data = ckpt.tensors[prefix + name].copy()
        p.grad = None
