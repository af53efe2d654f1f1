"""Binary checkpoint format shared by every trained model in the package.

Layout: magic ``FFL1``, u32 version, u32 header length, UTF-8 JSON header
(model kind, architecture spec, dataset card dims, parameter manifest), then
the parameter tensors as little-endian float64 blobs in declared order.
Round-trips are bit-exact.
"""

import hashlib
import json
import struct

import numpy as np

MAGIC = b"FFL1"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, kind, meta, named_params):
    """named_params: ordered list of (name, float64 ndarray)."""
    header = {
        "kind": kind,
        "meta": meta,
        "params": [{"name": n, "shape": list(a.shape)} for n, a in named_params],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for _, arr in named_params:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns (kind, meta, dict name -> float64 ndarray)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}")
    version, header_len = struct.unpack("<II", blob[4:12])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    header = json.loads(blob[12:12 + header_len].decode("utf-8"))
    offset = 12 + header_len
    params = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        arr = np.frombuffer(blob[offset:offset + nbytes], dtype="<f8")
        if arr.size != count:
            raise CheckpointError(f"{path}: truncated parameter blob "
                                  f"{entry['name']!r}")
        params[entry["name"]] = arr.reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return header["kind"], header["meta"], params


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
