"""Shared little-endian binary container for dense float64 matrices.

Layout: 4-byte magic, u32 version, length-prefixed UTF-8 tag, u32 count
of u64 metadata integers, the metadata, u64 rows, u64 cols, then the
row-major float64 payload.
"""

import os
import struct

import numpy as np

from .errors import ParseError

VERSION = 1


def write_matrix(path, magic, tag, meta, matrix):
    matrix = np.ascontiguousarray(matrix, dtype="<f8")
    if matrix.ndim != 2:
        raise ValueError("only 2-D matrices are stored")
    tag_bytes = tag.encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(tag_bytes)))
        fh.write(tag_bytes)
        fh.write(struct.pack("<I", len(meta)))
        for m in meta:
            fh.write(struct.pack("<Q", m))
        fh.write(struct.pack("<QQ", matrix.shape[0], matrix.shape[1]))
        fh.write(matrix.tobytes(order="C"))
    os.replace(tmp, path)


def read_matrix(path, magic):
    with open(path, "rb") as fh:
        got = fh.read(4)
        if got != magic:
            raise ParseError(f"{path}: bad magic {got!r}, expected {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise ParseError(f"{path}: unsupported version {version}")
        (tag_len,) = struct.unpack("<I", fh.read(4))
        tag = fh.read(tag_len).decode("utf-8")
        (n_meta,) = struct.unpack("<I", fh.read(4))
        meta = [struct.unpack("<Q", fh.read(8))[0] for _ in range(n_meta)]
        rows, cols = struct.unpack("<QQ", fh.read(16))
        payload = fh.read(rows * cols * 8)
        if len(payload) != rows * cols * 8:
            raise ParseError(f"{path}: truncated payload")
        matrix = np.frombuffer(payload, dtype="<f8").reshape(rows, cols)
    return tag, meta, np.array(matrix, dtype=np.float64)
