"""Binary checkpoint files.

Layout, all integers little-endian:

    magic   4 bytes  b"TRCE"
    u32     format version (1)
    u32     config JSON byte length
    bytes   config JSON (utf-8)
    u32     parameter count
    per parameter:
        u32   name byte length
        bytes name (utf-8)
        u32   rank
        u32*  extents
    f32*    parameter data, contiguous, in manifest order

Data is written exactly as stored (float32), so save followed by load is
bitwise lossless.
"""

import json
import struct

import numpy as np

from .errors import ConfigMismatch

MAGIC = b"TRCE"
VERSION = 1


def save_checkpoint(path, config: dict, params: dict, step: int = 0):
    """Write config plus named float32 arrays. Param order is preserved."""
    header = dict(config)
    header["step"] = int(step)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(struct.pack("<I", len(params)))
        for name, arr in params.items():
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        for arr in params.values():
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (config dict incl. 'step', params dict)."""
    with open(path, "rb") as f:
        raw = f.read()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(raw):
            raise ConfigMismatch("checkpoint truncated")
        piece = raw[off : off + n]
        off += n
        return piece

    if take(4) != MAGIC:
        raise ConfigMismatch("bad checkpoint magic")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise ConfigMismatch(f"unsupported checkpoint version {version}")
    (cfg_len,) = struct.unpack("<I", take(4))
    config = json.loads(take(cfg_len).decode("utf-8"))
    (count,) = struct.unpack("<I", take(4))
    manifest = []
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        manifest.append((name, shape))
    params = {}
    for name, shape in manifest:
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(take(4 * n), dtype="<f4").reshape(shape)
        params[name] = arr.astype(np.float32)
    if off != len(raw):
        raise ConfigMismatch("trailing bytes after checkpoint payload")
    return config, params
