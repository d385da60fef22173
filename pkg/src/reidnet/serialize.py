"""Binary tensor and checkpoint files.

Tensor record: magic ``TNSR``, u32 rank, u64 extents, float64 payload in
row-major order, everything little-endian. Checkpoint: magic ``CKPT``,
u32 version, a length-prefixed UTF-8 JSON manifest, then named tensor
records.
"""

from __future__ import annotations

import json
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Mapping

import numpy as np

TENSOR_MAGIC = b"TNSR"
CHECKPOINT_MAGIC = b"CKPT"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for malformed or incomplete checkpoint/tensor files."""


def tensor_to_bytes(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr, dtype=np.float64)
    header = TENSOR_MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + arr.astype("<f8").tobytes(order="C")


def tensor_from_bytes(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Decode one tensor record; returns (array, offset past the record)."""
    if buf[offset:offset + 4] != TENSOR_MAGIC:
        raise CheckpointError(f"bad tensor magic at offset {offset}")
    offset += 4
    (rank,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    shape = struct.unpack_from(f"<{rank}Q", buf, offset)
    offset += 8 * rank
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    arr = np.frombuffer(buf, dtype="<f8", count=count, offset=offset).reshape(shape)
    offset += 8 * count
    return arr.astype(np.float64), offset


def write_tensor(path, arr: np.ndarray) -> None:
    Path(path).write_bytes(tensor_to_bytes(arr))


def read_tensor(path) -> np.ndarray:
    arr, _ = tensor_from_bytes(Path(path).read_bytes())
    return arr


def write_checkpoint(path, manifest: dict, records: Mapping[str, np.ndarray]) -> None:
    manifest_bytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    parts = [CHECKPOINT_MAGIC,
             struct.pack("<I", CHECKPOINT_VERSION),
             struct.pack("<Q", len(manifest_bytes)),
             manifest_bytes,
             struct.pack("<I", len(records))]
    for name, arr in records.items():
        name_bytes = name.encode("utf-8")
        parts.append(struct.pack("<I", len(name_bytes)))
        parts.append(name_bytes)
        parts.append(tensor_to_bytes(arr))
    Path(path).write_bytes(b"".join(parts))


def read_checkpoint(path) -> tuple[dict, "OrderedDict[str, np.ndarray]"]:
    try:
        buf = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from None
    if buf[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file (bad magic)")
    offset = 4
    (version,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (mlen,) = struct.unpack_from("<Q", buf, offset)
    offset += 8
    manifest = json.loads(buf[offset:offset + mlen].decode("utf-8"))
    offset += mlen
    (num_records,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    records: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(num_records):
        (nlen,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        name = buf[offset:offset + nlen].decode("utf-8")
        offset += nlen
        arr, offset = tensor_from_bytes(buf, offset)
        records[name] = arr
    return manifest, records
