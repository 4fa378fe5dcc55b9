"""Binary feature-cache file.

All integers little-endian::

    magic      4 bytes  b"FPFC"
    version    u8       1
    meta_len   u32      then meta_len bytes of UTF-8 JSON (descriptor settings etc.)
    count      u32      number of records
    record * count:
        id_len u16, id (UTF-8)
        length u32                     vector length
        n_layout u16
        layout * n_layout: name_len u8, name, plane_len u8, plane, offset u32, length u32
        values   length * float32
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .._io import atomic_write_bytes
from ..errors import CorruptHeaderError, ShapeMismatchError, TruncatedPayloadError
from .descriptor import DescriptorVector, LayoutEntry

MAGIC = b"FPFC"
VERSION = 1


def _short(s: str, fmt: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack(fmt, len(raw)) + raw


def encode_cache(records: list[tuple[str, DescriptorVector]], meta: dict | None = None) -> bytes:
    meta_raw = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    out = [MAGIC, struct.pack("<B", VERSION), struct.pack("<I", len(meta_raw)), meta_raw,
           struct.pack("<I", len(records))]
    for ident, vec in records:
        out.append(_short(ident, "<H"))
        out.append(struct.pack("<I", len(vec)))
        out.append(struct.pack("<H", len(vec.layout)))
        for e in vec.layout:
            out.append(_short(e.descriptor, "<B"))
            out.append(_short(e.plane, "<B"))
            out.append(struct.pack("<II", e.offset, e.length))
        out.append(np.ascontiguousarray(vec.values, dtype="<f4").tobytes())
    return b"".join(out)


def write_cache(path, records: list[tuple[str, DescriptorVector]], meta: dict | None = None) -> None:
    atomic_write_bytes(path, encode_cache(records, meta))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedPayloadError(
                f"feature cache truncated: need {n} bytes at offset {self.pos}, file has {len(self.buf)}")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def text(self, fmt: str) -> str:
        (n,) = self.unpack(fmt)
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptHeaderError(f"invalid UTF-8 string at offset {self.pos}") from exc


def decode_cache(buf: bytes) -> tuple[list[tuple[str, DescriptorVector]], dict]:
    if len(buf) < 5:
        raise TruncatedPayloadError("feature cache shorter than its header")
    if buf[:4] != MAGIC:
        raise CorruptHeaderError(f"bad feature-cache magic {buf[:4]!r}")
    if buf[4] != VERSION:
        raise CorruptHeaderError(f"unsupported feature-cache version {buf[4]}")
    r = _Reader(buf)
    r.pos = 5
    (meta_len,) = r.unpack("<I")
    try:
        meta = json.loads(r.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptHeaderError("feature-cache metadata is not valid JSON") from exc
    (count,) = r.unpack("<I")
    records = []
    for _ in range(count):
        ident = r.text("<H")
        (length,) = r.unpack("<I")
        (n_layout,) = r.unpack("<H")
        layout = []
        for _ in range(n_layout):
            name = r.text("<B")
            plane = r.text("<B")
            offset, n = r.unpack("<II")
            layout.append(LayoutEntry(name, plane, offset, n))
        if sum(e.length for e in layout) != length:
            raise ShapeMismatchError(f"record {ident!r}: layout covers "
                                     f"{sum(e.length for e in layout)} values, vector has {length}")
        values = np.frombuffer(r.take(4 * length), dtype="<f4").astype(np.float32)
        records.append((ident, DescriptorVector(values, layout)))
    if r.pos != len(buf):
        raise CorruptHeaderError(f"{len(buf) - r.pos} trailing bytes after last record")
    return records, meta


def read_cache(path) -> tuple[list[tuple[str, DescriptorVector]], dict]:
    return decode_cache(Path(path).read_bytes())
