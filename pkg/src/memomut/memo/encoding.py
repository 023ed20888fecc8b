"""Canonical binary encoding of Mini values and FNV-1a hashing.

The encoding is type-tagged and length-prefixed, injective up to deep
structural equality, and is the basis for memo-table keys, record
payloads, and program fingerprints.
"""

from __future__ import annotations

import struct

from ..lang.ast import Program, print_program
from ..lang.values import UNIT, FnRef, Value

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

TAG_INT = 0x01
TAG_BOOL = 0x02
TAG_STR = 0x03
TAG_ARR = 0x04
TAG_FNREF = 0x05
TAG_UNIT = 0x06


class DecodeError(ValueError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


def encode_value(v: Value) -> bytes:
    out = bytearray()
    _encode_into(v, out)
    return bytes(out)


def _encode_into(v: Value, out: bytearray) -> None:
    if v is UNIT:
        out.append(TAG_UNIT)
    elif type(v) is bool:
        out.append(TAG_BOOL)
        out.append(1 if v else 0)
    elif type(v) is int:
        out.append(TAG_INT)
        out += struct.pack(">q", v)
    elif type(v) is str:
        raw = v.encode("utf-8")
        out.append(TAG_STR)
        out += struct.pack(">I", len(raw))
        out += raw
    elif isinstance(v, list):
        out.append(TAG_ARR)
        out += struct.pack(">I", len(v))
        for x in v:
            _encode_into(x, out)
    elif isinstance(v, FnRef):
        raw = v.name.encode("utf-8")
        out.append(TAG_FNREF)
        out += struct.pack(">I", len(raw))
        out += raw
    else:
        raise TypeError(f"not a Mini value: {v!r}")


def decode_value(buf: bytes, offset: int = 0) -> tuple[Value, int]:
    """Decode one value; returns (value, next offset)."""
    if offset >= len(buf):
        raise DecodeError(offset, "truncated value")
    tag = buf[offset]
    offset += 1
    if tag == TAG_UNIT:
        return UNIT, offset
    if tag == TAG_BOOL:
        if offset >= len(buf) or buf[offset] not in (0, 1):
            raise DecodeError(offset, "bad bool")
        return buf[offset] == 1, offset + 1
    if tag == TAG_INT:
        if offset + 8 > len(buf):
            raise DecodeError(offset, "truncated int")
        return struct.unpack_from(">q", buf, offset)[0], offset + 8
    if tag in (TAG_STR, TAG_FNREF):
        if offset + 4 > len(buf):
            raise DecodeError(offset, "truncated length")
        n = struct.unpack_from(">I", buf, offset)[0]
        offset += 4
        if offset + n > len(buf):
            raise DecodeError(offset, "truncated bytes")
        try:
            text = buf[offset : offset + n].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(offset, "bad utf-8") from exc
        value = text if tag == TAG_STR else FnRef(text)
        return value, offset + n
    if tag == TAG_ARR:
        if offset + 4 > len(buf):
            raise DecodeError(offset, "truncated count")
        n = struct.unpack_from(">I", buf, offset)[0]
        offset += 4
        items = []
        for _ in range(n):
            item, offset = decode_value(buf, offset)
            items.append(item)
        return items, offset
    raise DecodeError(offset - 1, f"unknown tag {tag:#x}")


def encode_key(args: list, global_items: list[tuple[str, Value]]) -> bytes:
    """Canonical memo-key bytes for (arguments, may-read global values).

    Globals must be supplied pre-sorted by name; both sections are
    count-prefixed so the concatenation stays injective.
    """
    out = bytearray()
    out += struct.pack(">I", len(args))
    for a in args:
        _encode_into(a, out)
    out += struct.pack(">I", len(global_items))
    for name, value in global_items:
        raw = name.encode("utf-8")
        out += struct.pack(">I", len(raw))
        out += raw
        _encode_into(value, out)
    return bytes(out)


def program_fingerprint(program: Program) -> int:
    """FNV-1a-64 of the canonical pretty-printed source."""
    return fnv1a64(print_program(program).encode("utf-8"))
