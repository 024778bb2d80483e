"""Loop termination predictor (ensemble component).

Tracks, per tagged entry, the trip count observed at loop exits (the
not-taken retirement of an otherwise taken back edge). Once the same trip
count has been confirmed enough times the component predicts the exit
iteration itself, which a history predictor only manages when the whole
loop body fits inside its history window.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError
from ..records import BranchKind, BranchRecord

# per-entry field widths, bits: tag 10, past 12, current 12, conf 2, age 3
ENTRY_BITS = 39
_MAX_TRIP = (1 << 12) - 1
_FRESH_AGE = 7


@dataclass(slots=True)
class LoopEntry:
    tag: int = -1
    past: int = 0       # confirmed trip count, 0 = not yet learned
    current: int = 0    # taken streak of the in-flight instance
    conf: int = 0
    age: int = 0


@dataclass(frozen=True, slots=True)
class LoopLookup:
    hit: bool
    predict_valid: bool   # entry is confident enough to drive the prediction
    taken: bool
    conf: int


class LoopPredictor:
    def __init__(self, entries: int = 64, tag_bits: int = 10):
        if entries < 1 or entries & (entries - 1):
            raise ConfigError(f"loop entries must be a power of two, got {entries}")
        self.entries = entries
        self.tag_bits = tag_bits
        self._idx_bits = entries.bit_length() - 1
        self.table = [LoopEntry() for _ in range(entries)]

    def _slot(self, ip: int) -> tuple[LoopEntry, int]:
        idx = (ip >> 2) & (self.entries - 1)
        tag = (ip >> (2 + self._idx_bits)) & ((1 << self.tag_bits) - 1)
        return self.table[idx], tag

    def lookup(self, ip: int) -> LoopLookup:
        entry, tag = self._slot(ip)
        if entry.tag != tag:
            return LoopLookup(False, False, False, 0)
        valid = entry.past > 0 and entry.conf >= 3
        # exit iteration: the (past)th retirement of the instance falls out
        taken = entry.current + 1 != entry.past
        return LoopLookup(True, valid, taken, entry.conf)

    def update(self, record: BranchRecord) -> None:
        if record.kind is not BranchKind.COND:
            return
        entry, tag = self._slot(record.ip)
        if entry.tag != tag:
            if entry.tag != -1 and entry.age > 0:
                entry.age -= 1
                return
            # claim the slot; a not-taken first observation gives no streak
            entry.tag = tag
            entry.past = 0
            entry.current = 1 if record.taken else 0
            entry.conf = 0
            entry.age = _FRESH_AGE
            return
        entry.age = _FRESH_AGE
        if record.taken:
            entry.current += 1
            if entry.current > _MAX_TRIP:
                # runaway streak: not loop-shaped, release the entry
                entry.tag = -1
            return
        observed = entry.current + 1
        entry.current = 0
        if entry.past == observed:
            entry.conf = min(3, entry.conf + 1)
        else:
            entry.past = observed
            entry.conf = 1

    def storage_bytes(self) -> int:
        return self.entries * ENTRY_BITS // 8
