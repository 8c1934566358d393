"""Shared on-disk container: JSON manifest + raw blob + CRC32 trailer.

Layout (all integers little-endian):

    magic      4 bytes   file-kind tag
    mlen       uint32    manifest byte length
    manifest   mlen bytes UTF-8 JSON, must carry "format_version"
    blob       rest minus 4 bytes
    crc32      uint32    CRC32 of the blob

Used by the vector store (.acstore), adapter files (.acadapter) and model
files (.acmodel). Blobs hold little-endian float32 matrices in row order.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .errors import CorruptFile, FormatVersionMismatch

MAGIC_STORE = b"ACST"
MAGIC_ADAPTER = b"ACAD"
MAGIC_MODEL = b"ACMD"


def write_container(path, magic: bytes, manifest: dict, blob: bytes) -> None:
    raw = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        fh.write(blob)
        fh.write(struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF))


def read_container(path, magic: bytes, expected_version: int) -> tuple[dict, bytes]:
    """Read and verify a container; returns (manifest, blob)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8 or data[:4] != magic:
        raise CorruptFile(f"{path}: not a {magic.decode('ascii', 'replace')} file")
    (mlen,) = struct.unpack_from("<I", data, 4)
    if len(data) < 8 + mlen + 4:
        raise CorruptFile(f"{path}: truncated")
    try:
        manifest = json.loads(data[8 : 8 + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"{path}: unreadable manifest") from exc
    version = manifest.get("format_version")
    if version != expected_version:
        raise FormatVersionMismatch(
            f"{path}: format_version {version!r}, expected {expected_version}"
        )
    blob = data[8 + mlen : -4]
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(blob) & 0xFFFFFFFF != crc:
        raise CorruptFile(f"{path}: blob checksum failure")
    return manifest, blob


def matrix_to_bytes(m: np.ndarray) -> bytes:
    """Row-order little-endian float32 bytes of a matrix or vector."""
    return np.ascontiguousarray(m, dtype="<f4").tobytes()


def matrix_from_bytes(blob: bytes, offset: int, shape: tuple[int, ...]) -> tuple[np.ndarray, int]:
    """Read one float32 matrix from `blob` at `offset`; returns (float64 array, next offset)."""
    count = int(np.prod(shape)) if shape else 0
    end = offset + 4 * count
    if end > len(blob):
        raise CorruptFile("blob shorter than its manifest promises")
    arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
    return arr.astype(np.float64).reshape(shape), end
