"""Global branch history state and history-folding helpers."""

from __future__ import annotations

from ..errors import ArgumentError


def fold_history(bits: int, length: int, width: int) -> int:
    """Compress ``length`` history bits down to ``width`` bits.

    The window is split MSB-first into ceil(length/width) chunks of
    ``width`` bits, the final partial chunk zero-padded on the right, and
    the chunks are XORed together. fold_history(0b1010, 4, 4) == 0b1010;
    fold_history(0b10100110, 8, 4) == 0b1100.
    """
    if width < 1:
        raise ArgumentError(f"fold width must be >= 1, got {width}")
    if length < 0:
        raise ArgumentError(f"fold length must be >= 0, got {length}")
    bits &= (1 << length) - 1 if length else 0
    acc = 0
    consumed = 0
    while consumed < length:
        take = min(width, length - consumed)
        chunk = (bits >> (length - consumed - take)) & ((1 << take) - 1)
        acc ^= chunk << (width - take)
        consumed += take
    return acc


class FoldedRegister:
    """Rolling ``width``-bit compression of the most recent ``length``
    direction bits, updated in O(1) per branch instead of refolding the
    whole window."""

    __slots__ = ("length", "width", "comp", "_outpoint", "_mask")

    def __init__(self, length: int, width: int):
        if width < 1 or length < 1:
            raise ArgumentError("folded register needs length >= 1 and width >= 1")
        self.length = length
        self.width = width
        self.comp = 0
        self._outpoint = length % width
        self._mask = (1 << width) - 1

    def update(self, new_bit: int, out_bit: int) -> None:
        comp = (self.comp << 1) | new_bit
        comp ^= out_bit << self._outpoint
        comp ^= comp >> self.width
        self.comp = comp & self._mask


class GlobalHistory:
    """Direction and path history shared by history-based predictors.

    Direction bits sit in a ring buffer so that single-bit reads at any
    age stay O(1) even for multi-thousand-bit histories; a rolling 64-bit
    register shadows the newest bits for cheap window extraction. Path
    history keeps the low 16 bits of the last ``path_entries`` branch ips,
    most recent in the low chunk.
    """

    __slots__ = ("capacity", "path", "_buf", "_head", "_low", "_low_mask", "_path_mask")

    PATH_CHUNK_BITS = 16
    LOW_BITS = 64

    def __init__(self, capacity: int, path_entries: int = 4):
        if capacity < 1:
            raise ArgumentError(f"history capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.path = 0
        self._buf = bytearray(capacity)
        self._head = 0   # ring slot of the most recent bit
        self._low = 0
        self._low_mask = (1 << min(self.LOW_BITS, capacity)) - 1
        self._path_mask = (1 << (path_entries * self.PATH_CHUNK_BITS)) - 1

    def push_direction(self, taken: bool) -> None:
        b = 1 if taken else 0
        head = self._head - 1
        if head < 0:
            head = self.capacity - 1
        self._head = head
        self._buf[head] = b
        self._low = ((self._low << 1) | b) & self._low_mask

    def push_path(self, ip: int) -> None:
        self.path = ((self.path << self.PATH_CHUNK_BITS) | (ip & 0xFFFF)) & self._path_mask

    def bit(self, age: int) -> int:
        """Direction bit ``age`` outcomes back (0 == most recent);
        unwritten or expired history reads as 0 (not taken)."""
        if age >= self.capacity:
            return 0
        i = self._head + age
        if i >= self.capacity:
            i -= self.capacity
        return self._buf[i]

    def window(self, length: int) -> int:
        """The most recent ``length`` direction bits as an int, bit 0 most
        recent; bits older than the capacity read as 0."""
        if length <= min(self.LOW_BITS, self.capacity):
            return self._low & ((1 << length) - 1)
        out = 0
        for age in range(min(length, self.capacity)):
            if self.bit(age):
                out |= 1 << age
        return out

    def path_window(self, length: int) -> int:
        """The most recent ``length`` path bits as an int."""
        return self.path & ((1 << length) - 1)
