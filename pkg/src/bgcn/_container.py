"""Checksummed binary container shared by dataset and checkpoint files.

Layout (all integers little-endian)::

    magic      4 bytes
    version    uint32
    meta_len   uint64, then meta_len bytes of UTF-8 JSON
    sections   raw little-endian array bytes, in the order listed in meta
    checksum   32-byte SHA-256 of everything above
"""
from __future__ import annotations

import hashlib
import json
import struct

import numpy as np


class FormatError(ValueError):
    pass


class ChecksumError(FormatError):
    pass


def write_container(path, magic: bytes, version: int, meta: dict,
                    arrays: dict[str, np.ndarray]) -> None:
    manifest = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        le = arr.dtype.newbyteorder("<")
        blob = arr.astype(le, copy=False).tobytes()
        manifest.append({"name": name, "dtype": le.str, "shape": list(arr.shape),
                         "nbytes": len(blob)})
        blobs.append(blob)
    head = json.dumps({"meta": meta, "sections": manifest}, sort_keys=True).encode()
    h = hashlib.sha256()
    with open(path, "wb") as fh:
        for chunk in (magic, struct.pack("<IQ", version, len(head)), head, *blobs):
            fh.write(chunk)
            h.update(chunk)
        fh.write(h.digest())


def read_container(path, magic: bytes, version: int) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 + 12 + 32:
        raise ChecksumError(f"{path}: file truncated")
    if raw[:4] != magic:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {magic!r}")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch (truncated or corrupted file)")
    ver, head_len = struct.unpack_from("<IQ", raw, 4)
    if ver != version:
        raise FormatError(f"{path}: format version {ver}, this build reads {version}")
    off = 16
    head = json.loads(body[off:off + head_len])
    off += head_len
    arrays = {}
    for sec in head["sections"]:
        arr = np.frombuffer(body, dtype=np.dtype(sec["dtype"]), offset=off,
                            count=int(np.prod(sec["shape"], dtype=np.int64)))
        arrays[sec["name"]] = arr.reshape(sec["shape"]).astype(arr.dtype.newbyteorder("="))
        off += sec["nbytes"]
    if off != len(body):
        raise FormatError(f"{path}: trailing bytes after last section")
    return head["meta"], arrays
