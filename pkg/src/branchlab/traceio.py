"""Trace serialization.

Four on-disk formats, two per trace level:

* ``bt1-text``: header line ``BT1`` then one CSV-ish line per branch,
  ``seq,ip_hex,kind,target_hex,taken`` (e.g. ``12,0x400a10,COND,0x400a40,1``).
* ``bt1-bin``: magic ``BT01``, u64 record count, then 26-byte little-endian
  records: u64 ip, u64 target, u64 seq, u8 kind code, u8 taken.
* ``it1-jsonl``: header object ``{"format":"IT1","instructions":N}`` then one
  JSON object per instruction. Empty operand collections are omitted; sets
  are sorted ascending so writer output is canonical.
* ``it1-bin``: magic ``IT01``, u64 record count, then per record
  u64 seq, u64 ip, u8 is_branch, [u8 kind, u64 target, u8 taken if branch],
  u8 count + count*u8 regs read, u8 count + count*(u8, u64) regs written,
  u8 count + count*u64 mem read, u8 count + count*u64 mem written.
  Set cardinalities above 255 are unrepresentable and rejected at write time.

Readers verify magic/header (FormatError), strictly increasing seq, declared
counts, and per-record invariants (CorruptTrace).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable

from .errors import ArgumentError, CorruptTrace, FormatError
from .records import (
    CODE_TO_KIND,
    KIND_TO_CODE,
    BranchKind,
    BranchRecord,
    InstructionRecord,
)

BT1_MAGIC = b"BT01"
IT1_MAGIC = b"IT01"
_BT1_REC = struct.Struct("<QQQBB")
_U64 = struct.Struct("<Q")

BRANCH_FORMATS = ("bt1-text", "bt1-bin")
INSTR_FORMATS = ("it1-jsonl", "it1-bin")

_EXT_FORMAT = {
    ".bt1": "bt1-text",
    ".bt1b": "bt1-bin",
    ".it1": "it1-jsonl",
    ".it1b": "it1-bin",
}


def format_for_path(path: str | Path) -> str:
    ext = Path(path).suffix.lower()
    try:
        return _EXT_FORMAT[ext]
    except KeyError:
        raise ArgumentError(
            f"cannot infer trace format from extension {ext!r}; "
            f"expected one of {sorted(_EXT_FORMAT)}"
        ) from None


def detect_format(data: bytes) -> str:
    """Sniff the serialization format from a stream prefix."""
    if data.startswith(BT1_MAGIC):
        return "bt1-bin"
    if data.startswith(IT1_MAGIC):
        return "it1-bin"
    if data.startswith(b"BT1\n") or data == b"BT1":
        return "bt1-text"
    if data.lstrip()[:1] == b"{":
        return "it1-jsonl"
    raise FormatError("unrecognized trace stream")


# ---------------------------------------------------------------- BT1

def write_branch_trace(records: Iterable[BranchRecord], fmt: str = "bt1-text") -> bytes:
    records = list(records)
    _check_order(records)
    if fmt == "bt1-text":
        lines = ["BT1"]
        for r in records:
            lines.append(
                f"{r.seq},{r.ip:#x},{r.kind.value},{r.target:#x},{1 if r.taken else 0}"
            )
        lines.append("")
        return "\n".join(lines).encode("ascii")
    if fmt == "bt1-bin":
        out = bytearray(BT1_MAGIC)
        out += _U64.pack(len(records))
        for r in records:
            out += _BT1_REC.pack(r.ip, r.target, r.seq, KIND_TO_CODE[r.kind], 1 if r.taken else 0)
        return bytes(out)
    raise ArgumentError(f"unknown branch trace format {fmt!r}")


def read_branch_trace(data: bytes, fmt: str | None = None) -> list[BranchRecord]:
    fmt = fmt or detect_format(data)
    if fmt == "bt1-text":
        return _read_bt1_text(data)
    if fmt == "bt1-bin":
        return _read_bt1_bin(data)
    raise ArgumentError(f"unknown branch trace format {fmt!r}")


def _read_bt1_text(data: bytes) -> list[BranchRecord]:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as e:
        raise FormatError(f"bt1-text is not ascii: {e}") from None
    lines = text.split("\n")
    if not lines or lines[0] != "BT1":
        raise FormatError("missing BT1 header line")
    records: list[BranchRecord] = []
    last_seq = -1
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise CorruptTrace(f"line {lineno}: expected 5 fields, got {len(parts)}")
        try:
            seq = int(parts[0])
            ip = int(parts[1], 16)
            kind = BranchKind(parts[2])
            target = int(parts[3], 16)
        except ValueError as e:
            raise CorruptTrace(f"line {lineno}: {e}") from None
        if parts[4] not in ("0", "1"):
            raise CorruptTrace(f"line {lineno}: taken must be 0 or 1, got {parts[4]!r}")
        rec = BranchRecord(seq=seq, ip=ip, kind=kind, target=target, taken=parts[4] == "1")
        _validate_rec(rec, f"line {lineno}", last_seq)
        last_seq = seq
        records.append(rec)
    return records


def _read_bt1_bin(data: bytes) -> list[BranchRecord]:
    if not data.startswith(BT1_MAGIC):
        raise FormatError("missing BT01 magic")
    if len(data) < len(BT1_MAGIC) + 8:
        raise CorruptTrace("truncated header")
    (count,) = _U64.unpack_from(data, len(BT1_MAGIC))
    off = len(BT1_MAGIC) + 8
    expected = off + count * _BT1_REC.size
    if len(data) != expected:
        raise CorruptTrace(f"payload is {len(data)} bytes, header implies {expected}")
    records: list[BranchRecord] = []
    last_seq = -1
    for i in range(count):
        ip, target, seq, kind_code, taken = _BT1_REC.unpack_from(data, off)
        off += _BT1_REC.size
        if kind_code not in CODE_TO_KIND:
            raise CorruptTrace(f"record {i}: unknown kind code {kind_code}")
        if taken not in (0, 1):
            raise CorruptTrace(f"record {i}: taken byte {taken} not 0/1")
        rec = BranchRecord(seq=seq, ip=ip, kind=CODE_TO_KIND[kind_code], target=target, taken=bool(taken))
        _validate_rec(rec, f"record {i}", last_seq)
        last_seq = seq
        records.append(rec)
    return records


# ---------------------------------------------------------------- IT1

def write_instr_trace(records: Iterable[InstructionRecord], fmt: str = "it1-jsonl") -> bytes:
    records = list(records)
    _check_order(records)
    if fmt == "it1-jsonl":
        lines = [json.dumps({"format": "IT1", "instructions": len(records)}, separators=(",", ":"))]
        for r in records:
            lines.append(json.dumps(_instr_to_obj(r), separators=(",", ":")))
        lines.append("")
        return "\n".join(lines).encode("ascii")
    if fmt == "it1-bin":
        out = bytearray(IT1_MAGIC)
        out += _U64.pack(len(records))
        for r in records:
            _pack_instr(out, r)
        return bytes(out)
    raise ArgumentError(f"unknown instruction trace format {fmt!r}")


def read_instr_trace(data: bytes, fmt: str | None = None) -> list[InstructionRecord]:
    fmt = fmt or detect_format(data)
    if fmt == "it1-jsonl":
        return _read_it1_jsonl(data)
    if fmt == "it1-bin":
        return _read_it1_bin(data)
    raise ArgumentError(f"unknown instruction trace format {fmt!r}")


def _instr_to_obj(r: InstructionRecord) -> dict:
    obj: dict = {"seq": r.seq, "ip": f"{r.ip:#x}", "is_branch": r.is_branch}
    if r.is_branch:
        assert r.kind is not None and r.target is not None
        obj["kind"] = r.kind.value
        obj["target"] = f"{r.target:#x}"
        obj["taken"] = bool(r.taken)
    if r.regs_read:
        obj["regs_read"] = sorted(r.regs_read)
    if r.regs_written:
        obj["regs_written"] = [[reg, val] for reg, val in r.regs_written]
    if r.mem_read:
        obj["mem_read"] = sorted(r.mem_read)
    if r.mem_written:
        obj["mem_written"] = sorted(r.mem_written)
    return obj


def _instr_from_obj(obj: dict, where: str) -> InstructionRecord:
    try:
        is_branch = bool(obj["is_branch"])
        rec = InstructionRecord(
            seq=int(obj["seq"]),
            ip=int(obj["ip"], 16) if isinstance(obj["ip"], str) else int(obj["ip"]),
            is_branch=is_branch,
            kind=BranchKind(obj["kind"]) if is_branch else None,
            target=(int(obj["target"], 16) if isinstance(obj.get("target"), str) else int(obj["target"])) if is_branch else None,
            taken=bool(obj["taken"]) if is_branch else None,
            regs_read=frozenset(int(x) for x in obj.get("regs_read", ())),
            regs_written=tuple((int(a), int(b)) for a, b in obj.get("regs_written", ())),
            mem_read=frozenset(int(x) for x in obj.get("mem_read", ())),
            mem_written=frozenset(int(x) for x in obj.get("mem_written", ())),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptTrace(f"{where}: {e!r}") from None
    return rec


def _read_it1_jsonl(data: bytes) -> list[InstructionRecord]:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as e:
        raise FormatError(f"it1-jsonl is not ascii: {e}") from None
    lines = [ln for ln in text.split("\n") if ln]
    if not lines:
        raise FormatError("empty stream")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise FormatError(f"bad header line: {e}") from None
    if not isinstance(header, dict) or header.get("format") != "IT1":
        raise FormatError("header does not declare IT1")
    declared = header.get("instructions")
    records: list[InstructionRecord] = []
    last_seq = -1
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorruptTrace(f"line {lineno}: {e}") from None
        rec = _instr_from_obj(obj, f"line {lineno}")
        _validate_rec(rec, f"line {lineno}", last_seq)
        last_seq = rec.seq
        records.append(rec)
    if declared != len(records):
        raise CorruptTrace(f"header declares {declared} instructions, stream has {len(records)}")
    return records


def _pack_instr(out: bytearray, r: InstructionRecord) -> None:
    out += _U64.pack(r.seq)
    out += _U64.pack(r.ip)
    out.append(1 if r.is_branch else 0)
    if r.is_branch:
        assert r.kind is not None and r.target is not None
        out.append(KIND_TO_CODE[r.kind])
        out += _U64.pack(r.target)
        out.append(1 if r.taken else 0)
    for name, vals in (("regs_read", sorted(r.regs_read)), ("regs_written", r.regs_written),
                       ("mem_read", sorted(r.mem_read)), ("mem_written", sorted(r.mem_written))):
        if len(vals) > 255:
            raise ArgumentError(f"{name} cardinality {len(vals)} exceeds u8 at seq {r.seq}")
        out.append(len(vals))
        if name == "regs_read":
            out += bytes(vals)
        elif name == "regs_written":
            for reg, val in vals:
                out.append(reg)
                out += _U64.pack(val)
        else:
            for v in vals:
                out += _U64.pack(v)


class _Cursor:
    __slots__ = ("data", "off")

    def __init__(self, data: bytes, off: int):
        self.data = data
        self.off = off

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise CorruptTrace(f"truncated stream at offset {self.off}")
        b = self.data[self.off : self.off + n]
        self.off += n
        return b

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def u8(self) -> int:
        return self.take(1)[0]


def _read_it1_bin(data: bytes) -> list[InstructionRecord]:
    if not data.startswith(IT1_MAGIC):
        raise FormatError("missing IT01 magic")
    cur = _Cursor(data, len(IT1_MAGIC))
    count = cur.u64()
    records: list[InstructionRecord] = []
    last_seq = -1
    for i in range(count):
        seq = cur.u64()
        ip = cur.u64()
        is_branch = cur.u8()
        if is_branch not in (0, 1):
            raise CorruptTrace(f"record {i}: is_branch byte {is_branch}")
        kind = target = taken = None
        if is_branch:
            kind_code = cur.u8()
            if kind_code not in CODE_TO_KIND:
                raise CorruptTrace(f"record {i}: unknown kind code {kind_code}")
            kind = CODE_TO_KIND[kind_code]
            target = cur.u64()
            tk = cur.u8()
            if tk not in (0, 1):
                raise CorruptTrace(f"record {i}: taken byte {tk}")
            taken = bool(tk)
        regs_read = frozenset(cur.take(cur.u8()))
        regs_written = tuple((cur.u8(), cur.u64()) for _ in range(cur.u8()))
        mem_read = frozenset(cur.u64() for _ in range(cur.u8()))
        mem_written = frozenset(cur.u64() for _ in range(cur.u8()))
        rec = InstructionRecord(
            seq=seq, ip=ip, is_branch=bool(is_branch), kind=kind, target=target,
            taken=taken, regs_read=regs_read, regs_written=regs_written,
            mem_read=mem_read, mem_written=mem_written,
        )
        _validate_rec(rec, f"record {i}", last_seq)
        last_seq = seq
        records.append(rec)
    if cur.off != len(data):
        raise CorruptTrace(f"{len(data) - cur.off} trailing bytes after {count} records")
    return records


# ---------------------------------------------------------------- shared

def _check_order(records: list) -> None:
    last = -1
    for r in records:
        if r.seq <= last:
            raise ArgumentError(f"records not strictly increasing in seq at {r.seq}")
        last = r.seq


def _validate_rec(rec, where: str, last_seq: int) -> None:
    if rec.seq <= last_seq:
        raise CorruptTrace(f"{where}: seq {rec.seq} not greater than previous {last_seq}")
    try:
        rec.validate()
    except ValueError as e:
        raise CorruptTrace(f"{where}: {e}") from None


def project_branches(instrs: Iterable[InstructionRecord]) -> list[BranchRecord]:
    """Project an instruction trace down to its branch trace."""
    return [r.to_branch() for r in instrs if r.is_branch]


# ---------------------------------------------------------------- paths

def save_trace(path: str | Path, records: list, fmt: str | None = None) -> None:
    """Write a branch or instruction trace; format inferred from extension
    unless given. Record level is inferred from the record type."""
    path = Path(path)
    fmt = fmt or format_for_path(path)
    if fmt in BRANCH_FORMATS:
        data = write_branch_trace(records, fmt)
    elif fmt in INSTR_FORMATS:
        data = write_instr_trace(records, fmt)
    else:
        raise ArgumentError(f"unknown trace format {fmt!r}")
    path.write_bytes(data)


def load_branch_trace(path: str | Path, fmt: str | None = None) -> list[BranchRecord]:
    """Load branches from any trace file; instruction traces are projected."""
    data = Path(path).read_bytes()
    fmt = fmt or detect_format(data)
    if fmt in BRANCH_FORMATS:
        return read_branch_trace(data, fmt)
    return project_branches(read_instr_trace(data, fmt))


def load_instr_trace(path: str | Path, fmt: str | None = None) -> list[InstructionRecord]:
    data = Path(path).read_bytes()
    fmt = fmt or detect_format(data)
    if fmt not in INSTR_FORMATS:
        raise ArgumentError(f"{path} is a branch-level trace; instruction records unavailable")
    return read_instr_trace(data, fmt)
