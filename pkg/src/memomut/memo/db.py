"""The memo-tables database: in-memory form and binary persistence.

File layout (all integers big-endian):

    magic "MEMU"
    u16  schema version
    u64  program fingerprint
    u64  tau (nanoseconds)
    u8   limit mode (1 = percent, 0 = absolute count)
    f64  limit value
    u32  table count
    u64  FNV-1a checksum of everything above
    per table:  u32 body length, body, u64 FNV-1a checksum of body
    exclusions: u32 body length, body, u64 FNV-1a checksum of body

Checksums make single-byte corruption detectable anywhere in the file;
version and fingerprint checks run only once the header checksum holds.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

from ..lang.ast import Program
from ..lang.values import Value
from .encoding import (
    DecodeError,
    decode_value,
    encode_value,
    fnv1a64,
    program_fingerprint,
)

MAGIC = b"MEMU"
SCHEMA_VERSION = 1


class FingerprintMismatch(Exception):
    pass


class SchemaVersionMismatch(Exception):
    pass


class CorruptDB(Exception):
    def __init__(self, offset: int, message: str = "corrupt data"):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset


@dataclass
class OutputRecord:
    ret: Value
    written_globals: dict[str, Value]
    post_args: dict[int, Value]
    output_steps: int


@dataclass
class MemoTable:
    fn: str
    may_read: list[str]  # global names, sorted; the key's global section
    may_write: list[str]
    mut_args: list[int]
    entries: dict[bytes, OutputRecord] = field(default_factory=dict)
    recorded_from: set[str] = field(default_factory=set)


@dataclass
class Exclusion:
    reason: str  # new_test_failure | cache_miss_on_covering_test | conflicted | state_restore_unsupported
    detail: Optional[str] = None


@dataclass
class MemoDB:
    fingerprint: int
    tau_ns: int
    limit_value: float
    limit_is_pct: bool
    tables: dict[str, MemoTable] = field(default_factory=dict)
    exclusions: dict[str, Exclusion] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION


_REASON_TAGS = {
    "new_test_failure": 1,
    "cache_miss_on_covering_test": 2,
    "conflicted": 3,
    "state_restore_unsupported": 4,
}
_TAG_REASONS = {v: k for k, v in _REASON_TAGS.items()}


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack(">I", len(raw)) + raw


def encode_record(rec: OutputRecord) -> bytes:
    out = bytearray()
    out += encode_value(rec.ret)
    out += struct.pack(">I", len(rec.written_globals))
    for name in sorted(rec.written_globals):
        out += _pack_str(name)
        out += encode_value(rec.written_globals[name])
    out += struct.pack(">I", len(rec.post_args))
    for pos in sorted(rec.post_args):
        out += struct.pack(">I", pos)
        out += encode_value(rec.post_args[pos])
    out += struct.pack(">Q", rec.output_steps)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.offset = offset

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise CorruptDB(self.offset, "truncated")
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack(">d", self.take(8))[0]

    def string(self) -> str:
        n = self.u32()
        raw = self.take(n)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptDB(self.offset - n, "bad utf-8") from exc

    def value(self) -> Value:
        try:
            v, self.offset = decode_value(self.data, self.offset)
        except DecodeError as exc:
            raise CorruptDB(exc.offset, str(exc)) from exc
        return v


def decode_record(data: bytes) -> OutputRecord:
    r = _Reader(data)
    ret = r.value()
    written = {}
    for _ in range(r.u32()):
        name = r.string()
        written[name] = r.value()
    post_args = {}
    for _ in range(r.u32()):
        pos = r.u32()
        post_args[pos] = r.value()
    steps = r.u64()
    if r.offset != len(data):
        raise CorruptDB(r.offset, "trailing bytes in record")
    return OutputRecord(ret=ret, written_globals=written, post_args=post_args, output_steps=steps)


def _table_body(table: MemoTable) -> bytes:
    out = bytearray()
    out += _pack_str(table.fn)
    for names in (table.may_read, table.may_write):
        out += struct.pack(">I", len(names))
        for n in names:
            out += _pack_str(n)
    out += struct.pack(">I", len(table.mut_args))
    for pos in table.mut_args:
        out += struct.pack(">I", pos)
    recorded = sorted(table.recorded_from)
    out += struct.pack(">I", len(recorded))
    for t in recorded:
        out += _pack_str(t)
    out += struct.pack(">I", len(table.entries))
    for key in sorted(table.entries):
        rec = encode_record(table.entries[key])
        out += struct.pack(">I", len(key))
        out += key
        out += struct.pack(">Q", fnv1a64(key))
        out += struct.pack(">I", len(rec))
        out += rec
    return bytes(out)


def _parse_table(data: bytes) -> MemoTable:
    r = _Reader(data)
    fn = r.string()
    may_read = [r.string() for _ in range(r.u32())]
    may_write = [r.string() for _ in range(r.u32())]
    mut_args = [r.u32() for _ in range(r.u32())]
    recorded = {r.string() for _ in range(r.u32())}
    entries: dict[bytes, OutputRecord] = {}
    for _ in range(r.u32()):
        key = r.take(r.u32())
        stored_hash = r.u64()
        if stored_hash != fnv1a64(key):
            raise CorruptDB(r.offset - 8, "key hash mismatch")
        rec = decode_record(r.take(r.u32()))
        entries[key] = rec
    if r.offset != len(data):
        raise CorruptDB(r.offset, "trailing bytes in table")
    return MemoTable(
        fn=fn,
        may_read=may_read,
        may_write=may_write,
        mut_args=mut_args,
        entries=entries,
        recorded_from=recorded,
    )


def db_to_bytes(db: MemoDB) -> bytes:
    header = bytearray()
    header += MAGIC
    header += struct.pack(">H", db.schema_version)
    header += struct.pack(">Q", db.fingerprint)
    header += struct.pack(">Q", db.tau_ns)
    header += struct.pack(">B", 1 if db.limit_is_pct else 0)
    header += struct.pack(">d", db.limit_value)
    header += struct.pack(">I", len(db.tables))
    header += struct.pack(">Q", fnv1a64(bytes(header)))

    out = bytearray(header)
    for fn in sorted(db.tables):
        body = _table_body(db.tables[fn])
        out += struct.pack(">I", len(body))
        out += body
        out += struct.pack(">Q", fnv1a64(body))

    excl = bytearray()
    excl += struct.pack(">I", len(db.exclusions))
    for fn in sorted(db.exclusions):
        e = db.exclusions[fn]
        excl += _pack_str(fn)
        excl += struct.pack(">B", _REASON_TAGS[e.reason])
        excl += _pack_str(e.detail or "")
    out += struct.pack(">I", len(excl))
    out += excl
    out += struct.pack(">Q", fnv1a64(bytes(excl)))
    return bytes(out)


def db_from_bytes(data: bytes, expected_fingerprint: Optional[int] = None) -> MemoDB:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise CorruptDB(0, "bad magic")
    version = r.u16()
    fingerprint = r.u64()
    tau_ns = r.u64()
    limit_is_pct = r.u8() == 1
    limit_value = r.f64()
    table_count = r.u32()
    header_end = r.offset
    if r.u64() != fnv1a64(data[:header_end]):
        raise CorruptDB(header_end, "header checksum mismatch")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"schema version {version}, expected {SCHEMA_VERSION}")
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        raise FingerprintMismatch(
            f"db fingerprint {fingerprint:#x} does not match program {expected_fingerprint:#x}"
        )
    db = MemoDB(
        fingerprint=fingerprint,
        tau_ns=tau_ns,
        limit_value=limit_value,
        limit_is_pct=limit_is_pct,
        schema_version=version,
    )
    for _ in range(table_count):
        body_start = r.offset + 4
        body = r.take(r.u32())
        if r.u64() != fnv1a64(body):
            raise CorruptDB(body_start, "table checksum mismatch")
        table = _parse_table(body)
        db.tables[table.fn] = table
    excl_start = r.offset + 4
    excl = r.take(r.u32())
    if r.u64() != fnv1a64(excl):
        raise CorruptDB(excl_start, "exclusions checksum mismatch")
    er = _Reader(excl)
    for _ in range(er.u32()):
        fn = er.string()
        tag = er.u8()
        if tag not in _TAG_REASONS:
            raise CorruptDB(excl_start + er.offset - 1, "bad exclusion reason")
        detail = er.string()
        db.exclusions[fn] = Exclusion(reason=_TAG_REASONS[tag], detail=detail or None)
    if er.offset != len(excl):
        raise CorruptDB(excl_start + er.offset, "trailing bytes in exclusions")
    if r.offset != len(data):
        raise CorruptDB(r.offset, "trailing bytes in file")
    return db


def save_db(db: MemoDB, path) -> None:
    with open(path, "wb") as fh:
        fh.write(db_to_bytes(db))


def load_db(path, program: Optional[Program] = None) -> MemoDB:
    """Load and verify a database, checking the fingerprint when a program is given."""
    with open(path, "rb") as fh:
        data = fh.read()
    expected = program_fingerprint(program) if program is not None else None
    return db_from_bytes(data, expected)


def db_to_json(db: MemoDB) -> dict:
    """Human-readable mirror for diagnostics; the binary file is authoritative."""
    from ..lang.values import format_value

    return {
        "fingerprint": db.fingerprint,
        "schema_version": db.schema_version,
        "tau_ns": db.tau_ns,
        "limit": {"value": db.limit_value, "is_pct": db.limit_is_pct},
        "tables": {
            fn: {
                "may_read": t.may_read,
                "may_write": t.may_write,
                "mut_args": t.mut_args,
                "recorded_from": sorted(t.recorded_from),
                "entries": [
                    {
                        "key_hash": f"{fnv1a64(key):016x}",
                        "return": format_value(t.entries[key].ret),
                        "written_globals": {
                            g: format_value(v) for g, v in sorted(t.entries[key].written_globals.items())
                        },
                        "post_args": {
                            str(p): format_value(v) for p, v in sorted(t.entries[key].post_args.items())
                        },
                        "output_steps": t.entries[key].output_steps,
                    }
                    for key in sorted(t.entries)
                ],
            }
            for fn, t in sorted(db.tables.items())
        },
        "exclusions": {
            fn: {"reason": e.reason, "detail": e.detail} for fn, e in sorted(db.exclusions.items())
        },
    }
