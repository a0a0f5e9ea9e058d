# pcpolab/nn/checkpoint.py
from __future__ import annotations
import os
import struct
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from pcpolab.errors import CheckpointError
from pcpolab.nn.mlp import Mlp, MlpSpec

# magic, format version u32, spec hash u64, parameter count u64; little-endian
MAGIC = b"PCPO"
VERSION = 1
HEADER = struct.Struct("<4sIQQ")
BUNDLE_NAMES = ("policy", "value", "risk")
SUFFIX = ".ckpt"


def save_params(path: str | os.PathLike, spec: MlpSpec, params: np.ndarray) -> None:
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (spec.n_params,):
        raise CheckpointError(f"parameter vector has shape {params.shape}, spec wants {spec.n_params}")
    with open(path, "wb") as f:
        f.write(HEADER.pack(MAGIC, VERSION, spec.spec_hash(), spec.n_params))
        f.write(params.astype("<f8").tobytes())


def load_params(path: str | os.PathLike, spec: Optional[MlpSpec] = None) -> Tuple[int, np.ndarray]:
    """Read one parameter file. With `spec`, the stored hash and count must match it."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, spec_hash, count = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    payload = raw[HEADER.size:]
    if len(payload) != 8 * count:
        raise CheckpointError(f"{path}: expected {count} floats, found {len(payload) // 8}")
    if spec is not None and (spec_hash != spec.spec_hash() or count != spec.n_params):
        raise CheckpointError(f"{path}: network spec mismatch")
    return spec_hash, np.frombuffer(payload, dtype="<f8").astype(np.float64)


def save_bundle(dirpath: str | os.PathLike, nets: Dict[str, Tuple[Mlp, np.ndarray]]) -> Path:
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    for name, (net, params) in nets.items():
        save_params(d / f"{name}{SUFFIX}", net.spec, params)
    return d


def load_bundle(dirpath: str | os.PathLike, nets: Dict[str, Mlp]) -> Dict[str, np.ndarray]:
    d = Path(dirpath)
    out = {}
    for name, net in nets.items():
        p = d / f"{name}{SUFFIX}"
        if not p.exists():
            raise CheckpointError(f"missing checkpoint file {p}")
        out[name] = load_params(p, net.spec)[1]
    return out


def latest_checkpoint(run_dir: str | os.PathLike) -> Path:
    ckpts = sorted((Path(run_dir) / "checkpoints").glob("epoch_*"))
    if not ckpts:
        raise CheckpointError(f"no checkpoints under {run_dir}")
    return ckpts[-1]
