"""Common conditional-predictor interface.

Every predictor exposes:

* ``predict(ip) -> (taken, confidence)`` with confidence an int in [0, 3].
  Pure: calling it any number of times must not change predictor state.
* ``update(record)``: retire one BranchRecord. Non-COND branches may still
  shift path history; only COND records train direction state.
* ``step(record) -> (predicted, provider) | None``: predict-then-update for
  one record, returning the prediction made for COND records. Subclasses
  override it when a fused implementation can share lookup work.
* ``storage_bytes() -> int``: modeled hardware budget of the table state.
"""

from __future__ import annotations

from ..records import BranchKind, BranchRecord


class ConditionalPredictor:
    name = "predictor"

    def predict(self, ip: int) -> tuple[bool, int]:
        raise NotImplementedError

    def update(self, record: BranchRecord) -> None:
        raise NotImplementedError

    def storage_bytes(self) -> int:
        raise NotImplementedError

    def step(self, record: BranchRecord) -> tuple[bool, str] | None:
        out = None
        if record.kind is BranchKind.COND:
            taken, _ = self.predict(record.ip)
            out = (taken, self.name)
        self.update(record)
        return out


def clamp(value: int, lo: int, hi: int) -> int:
    if value < lo:
        return lo
    if value > hi:
        return hi
    return value


def counter_confidence(counter: int, maximum: int) -> int:
    """Map an unsigned 2-bit counter to confidence: saturated ends are 3,
    weak middle is 0."""
    return 3 if counter in (0, maximum) else 0
