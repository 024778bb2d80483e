"""Offline-trained per-branch helper predictors.

A helper is a small model specialized to one static branch, trained
offline from traces of the same program over several inputs, serialized
to a sidecar file, and attached to a baseline predictor at simulation
time. At prediction the helper overrides the baseline only for its own
ip and only when its confidence clears the model's threshold; its
parameters never change online.

Two kinds:
  pattern-table  exact h-bit global-history pattern -> direction counts
  perceptron     integer weights over h history positions plus bias

History convention matches the online predictors: bit 0 of the history
integer is the most recent COND outcome.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ArgumentError, ConfigError, CorruptModel, FormatError, TrainingError
from .records import BranchKind, BranchRecord

HM1_MAGIC = b"HM01"
HM1_VERSION = 1

PATTERN_TABLE = "pattern-table"
PERCEPTRON = "perceptron"
_KIND_CODES = {PATTERN_TABLE: 0, PERCEPTRON: 1}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}

MAX_HISTORY = 64
MIN_TRAINING_SAMPLES = 1000
DEFAULT_TAU = 0.7
DEFAULT_EPOCHS = 20
_WEIGHT_MIN, _WEIGHT_MAX = -32768, 32767   # i16 storage bound


@dataclass(frozen=True)
class HelperModel:
    """Frozen per-branch model. params:
    pattern-table -> {pattern int: (taken count, not-taken count)}
    perceptron    -> {"theta": int, "weights": (bias, w1..wh)}"""

    ip: int
    kind: str
    h: int
    tau: float
    params: dict
    provenance: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ArgumentError(f"unknown helper kind {self.kind!r}")
        if not 1 <= self.h <= MAX_HISTORY:
            raise ArgumentError(f"history length must be in [1, {MAX_HISTORY}]")
        if not 0.0 <= self.tau <= 1.0:
            raise ArgumentError("confidence threshold must lie in [0, 1]")

    def predict(self, history: int) -> tuple[bool, float]:
        """(direction, confidence in [0, 1]) for an h-bit history."""
        key = history & ((1 << self.h) - 1)
        if self.kind == PATTERN_TABLE:
            entry = self.params.get(key)
            if entry is None:
                return True, 0.0
            t, n = entry
            total = t + n
            return t >= n, abs(t - n) / total if total else 0.0
        theta = self.params["theta"]
        weights = self.params["weights"]
        y = weights[0]
        for i in range(1, self.h + 1):
            if (key >> (i - 1)) & 1:
                y += weights[i]
            else:
                y -= weights[i]
        return y >= 0, min(1.0, abs(y) / (2 * theta))


@dataclass(frozen=True)
class CorpusTrace:
    trace_id: str
    input_id: str
    records: tuple[BranchRecord, ...]


class TrainingCorpus:
    """Labeled traces plus (history, outcome) sample extraction."""

    def __init__(self, traces: Iterable[CorpusTrace] = ()):
        self.traces: list[CorpusTrace] = list(traces)

    def add(self, trace_id: str, input_id: str, records: Sequence[BranchRecord]) -> None:
        self.traces.append(CorpusTrace(trace_id, input_id, tuple(records)))

    def provenance(self) -> tuple[tuple[str, str], ...]:
        return tuple((t.trace_id, t.input_id) for t in self.traces)

    def input_ids(self) -> set[str]:
        return {t.input_id for t in self.traces}

    def samples(self, target_ip: int, h: int) -> list[tuple[int, bool]]:
        """All (h-bit global history, outcome) pairs at the target ip's COND
        executions, in trace order. History resets between traces."""
        mask = (1 << h) - 1
        out: list[tuple[int, bool]] = []
        for trace in self.traces:
            hist = 0
            for rec in trace.records:
                if rec.kind is not BranchKind.COND:
                    continue
                if rec.ip == target_ip:
                    out.append((hist & mask, rec.taken))
                hist = ((hist << 1) | int(rec.taken)) & mask
        return out


def train_helper(
    corpus: TrainingCorpus,
    target_ip: int,
    kind: str = PATTERN_TABLE,
    h: int = 16,
    tau: float = DEFAULT_TAU,
    epochs: int = DEFAULT_EPOCHS,
) -> HelperModel:
    """Fit one helper from the corpus. Deterministic for a fixed corpus
    order; requires at least MIN_TRAINING_SAMPLES target executions."""
    if kind not in _KIND_CODES:
        raise ArgumentError(f"unknown helper kind {kind!r}")
    if not 1 <= h <= MAX_HISTORY:
        raise ArgumentError(f"history length must be in [1, {MAX_HISTORY}]")
    samples = corpus.samples(target_ip, h)
    if len(samples) < MIN_TRAINING_SAMPLES:
        raise TrainingError(
            f"{len(samples)} samples of {target_ip:#x}, need {MIN_TRAINING_SAMPLES}"
        )
    if kind == PATTERN_TABLE:
        table: dict[int, tuple[int, int]] = {}
        for hist, taken in samples:
            t, n = table.get(hist, (0, 0))
            table[hist] = (t + 1, n) if taken else (t, n + 1)
        params: dict = table
    else:
        theta = int(1.93 * h + 14)
        weights = [0] * (h + 1)
        for _ in range(epochs):
            changed = False
            for hist, taken in samples:
                y = weights[0]
                for i in range(1, h + 1):
                    y += weights[i] if (hist >> (i - 1)) & 1 else -weights[i]
                if (y >= 0) != taken or abs(y) <= theta:
                    step = 1 if taken else -1
                    weights[0] = min(_WEIGHT_MAX, max(_WEIGHT_MIN, weights[0] + step))
                    for i in range(1, h + 1):
                        delta = step if (hist >> (i - 1)) & 1 else -step
                        w = weights[i] + delta
                        weights[i] = min(_WEIGHT_MAX, max(_WEIGHT_MIN, w))
                    changed = True
            if not changed:
                break
        params = {"theta": theta, "weights": tuple(weights)}
    return HelperModel(target_ip, kind, h, tau, params, corpus.provenance())


# --- HM1 serialization ------------------------------------------------

def _encode_params(model: HelperModel) -> bytes:
    if model.kind == PATTERN_TABLE:
        parts = [struct.pack("<I", len(model.params))]
        for pattern in sorted(model.params):
            t, n = model.params[pattern]
            parts.append(struct.pack("<QII", pattern, t, n))
        return b"".join(parts)
    theta = model.params["theta"]
    weights = model.params["weights"]
    return struct.pack("<IH", theta, len(weights)) + struct.pack(
        f"<{len(weights)}h", *weights
    )


def _decode_params(kind: str, h: int, payload: bytes) -> dict:
    try:
        if kind == PATTERN_TABLE:
            (count,) = struct.unpack_from("<I", payload, 0)
            table = {}
            off = 4
            for _ in range(count):
                pattern, t, n = struct.unpack_from("<QII", payload, off)
                off += 16
                table[pattern] = (t, n)
            if off != len(payload):
                raise FormatError("pattern-table payload has trailing bytes")
            return table
        theta, n_weights = struct.unpack_from("<IH", payload, 0)
        if n_weights != h + 1:
            raise FormatError(f"perceptron payload expects {h + 1} weights, has {n_weights}")
        weights = struct.unpack_from(f"<{n_weights}h", payload, 6)
        if 6 + 2 * n_weights != len(payload):
            raise FormatError("perceptron payload has trailing bytes")
        return {"theta": theta, "weights": tuple(weights)}
    except struct.error as exc:
        raise FormatError(f"truncated helper parameter payload: {exc}") from exc


def _encode_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ArgumentError("provenance string too long")
    return struct.pack("<H", len(raw)) + raw


def serialize_models(models: Sequence[HelperModel]) -> bytes:
    """HM1 byte stream: magic, version, count, per-model body, CRC-32 of
    everything after the magic."""
    ips = [m.ip for m in models]
    if len(set(ips)) != len(ips):
        raise ConfigError("duplicate target ips in model list")
    body = [struct.pack("<II", HM1_VERSION, len(models))]
    for m in models:
        payload = _encode_params(m)
        body.append(struct.pack("<QBH", m.ip, _KIND_CODES[m.kind], m.h))
        body.append(struct.pack("<I", len(payload)))
        body.append(payload)
        body.append(struct.pack("<f", m.tau))
        body.append(struct.pack("<H", len(m.provenance)))
        for trace_id, input_id in m.provenance:
            body.append(_encode_str(trace_id))
            body.append(_encode_str(input_id))
    blob = b"".join(body)
    return HM1_MAGIC + blob + struct.pack("<I", zlib.crc32(blob))


def deserialize_models(data: bytes) -> list[HelperModel]:
    if len(data) < 4 or data[:4] != HM1_MAGIC:
        raise FormatError("not an HM1 model file (bad magic)")
    if len(data) < 12:
        raise CorruptModel("HM1 file truncated")
    blob, (crc,) = data[4:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(blob) != crc:
        raise CorruptModel("HM1 checksum mismatch")
    try:
        version, count = struct.unpack_from("<II", blob, 0)
    except struct.error as exc:
        raise CorruptModel(f"HM1 header truncated: {exc}") from exc
    if version != HM1_VERSION:
        raise FormatError(f"unsupported HM1 version {version}")
    models = []
    off = 8
    try:
        for _ in range(count):
            ip, kind_code, h = struct.unpack_from("<QBH", blob, off)
            off += 11
            if kind_code not in _CODE_KINDS:
                raise FormatError(f"unknown helper kind code {kind_code}")
            (plen,) = struct.unpack_from("<I", blob, off)
            off += 4
            payload = blob[off : off + plen]
            if len(payload) != plen:
                raise CorruptModel("HM1 parameter payload truncated")
            off += plen
            (tau,) = struct.unpack_from("<f", blob, off)
            off += 4
            (n_prov,) = struct.unpack_from("<H", blob, off)
            off += 2
            prov = []
            for _ in range(n_prov):
                pair = []
                for _ in range(2):
                    (slen,) = struct.unpack_from("<H", blob, off)
                    off += 2
                    pair.append(blob[off : off + slen].decode("utf-8"))
                    off += slen
                prov.append((pair[0], pair[1]))
            kind = _CODE_KINDS[kind_code]
            models.append(
                HelperModel(ip, kind, h, tau, _decode_params(kind, h, payload), tuple(prov))
            )
    except struct.error as exc:
        raise CorruptModel(f"HM1 model body truncated: {exc}") from exc
    if off != len(blob):
        raise FormatError("HM1 file has trailing bytes")
    return models


def save_model(model: HelperModel) -> bytes:
    return serialize_models([model])


def load_model(data: bytes) -> HelperModel:
    models = deserialize_models(data)
    if len(models) != 1:
        raise FormatError(f"expected exactly one model, file holds {len(models)}")
    return models[0]


def save_models_file(path, models: Sequence[HelperModel]) -> None:
    import os

    data = serialize_models(models)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load_models_file(path) -> list[HelperModel]:
    with open(path, "rb") as fh:
        return deserialize_models(fh.read())


# --- composite predictor ----------------------------------------------

@dataclass
class HelperTelemetry:
    queries: int = 0
    overrides: int = 0
    override_correct: int = 0


class HelperedPredictor:
    """Baseline predictor plus frozen per-ip helpers.

    For a COND branch at a covered ip, the helper's direction is used when
    its confidence is >= the model's tau; the baseline still trains on
    every branch, so with zero helpers the composite's misprediction
    stream equals the baseline's exactly."""

    def __init__(self, baseline, models: Sequence[HelperModel] = (), tau: float | None = None):
        ips = [m.ip for m in models]
        if len(set(ips)) != len(ips):
            raise ConfigError("duplicate helper ips")
        self.baseline = baseline
        self.helpers: dict[int, HelperModel] = {m.ip: m for m in models}
        self.tau_override = tau
        self.telemetry: dict[int, HelperTelemetry] = {ip: HelperTelemetry() for ip in self.helpers}
        self._history = 0

    def _helper_call(self, rec: BranchRecord) -> tuple[bool, float] | None:
        model = self.helpers.get(rec.ip)
        if model is None:
            return None
        taken, conf = model.predict(self._history)
        tau = self.tau_override if self.tau_override is not None else model.tau
        if conf >= tau:
            return taken, conf
        return None

    def predict(self, rec: BranchRecord) -> tuple[bool, int]:
        call = self._helper_call(rec)
        if call is not None:
            return call[0], 3
        return self.baseline.predict(rec)

    def step(self, rec: BranchRecord):
        if rec.kind is not BranchKind.COND:
            self.baseline.step(rec)
            return None
        call = self._helper_call(rec)
        if rec.ip in self.telemetry:
            self.telemetry[rec.ip].queries += 1
        base = self.baseline.step(rec)
        if call is None:
            predicted, provider = base
        else:
            predicted = call[0]
            provider = "helper"
            t = self.telemetry[rec.ip]
            t.overrides += 1
            if predicted == rec.taken:
                t.override_correct += 1
        self._history = (self._history << 1) | int(rec.taken)
        self._history &= (1 << MAX_HISTORY) - 1
        return predicted, provider

    def update(self, rec: BranchRecord) -> None:
        self.step(rec)

    def storage_bytes(self) -> int:
        extra = len(serialize_models(list(self.helpers.values()))) if self.helpers else 0
        return self.baseline.storage_bytes() + extra


def attach_helpers(baseline, models: Sequence[HelperModel], tau: float | None = None) -> HelperedPredictor:
    return HelperedPredictor(baseline, models, tau)


# --- generalization evaluation ----------------------------------------

@dataclass(frozen=True)
class GeneralizationRow:
    ip: int
    executions: int
    baseline_accuracy: float | None
    composite_accuracy: float | None
    delta: float | None


@dataclass(frozen=True)
class GeneralizationReport:
    rows: tuple[GeneralizationRow, ...]
    overall_baseline: float
    overall_composite: float

    def row_for(self, ip: int) -> GeneralizationRow:
        for row in self.rows:
            if row.ip == ip:
                return row
        raise KeyError(ip)


def evaluate_generalization(
    models: Sequence[HelperModel],
    records: Sequence[BranchRecord],
    baseline="tage-sc-l:8kb",
    seed: int = 0,
    tau: float | None = None,
) -> GeneralizationReport:
    """Simulate the baseline alone and with helpers attached on a held-out
    trace; report per-target and overall accuracy deltas. A model ip that
    never executes is reported with zero executions, not an error."""
    from .charax import per_ip_totals
    from .predictors import make_predictor, simulate

    records = list(records)

    def build():
        if isinstance(baseline, (str, dict)):
            return make_predictor(baseline, seed=seed)
        return baseline()   # factory for pre-built configs

    base_stream = simulate(records, build())
    comp_stream = simulate(records, attach_helpers(build(), models, tau))
    base_stats = per_ip_totals(base_stream)
    comp_stats = per_ip_totals(comp_stream)
    rows = []
    for model in models:
        b = base_stats.get(model.ip)
        c = comp_stats.get(model.ip)
        if b is None or b.executions == 0:
            rows.append(GeneralizationRow(model.ip, 0, None, None, None))
            continue
        acc_b = b.accuracy
        acc_c = c.accuracy
        rows.append(GeneralizationRow(model.ip, b.executions, acc_b, acc_c, acc_c - acc_b))
    return GeneralizationReport(tuple(rows), base_stream.accuracy(), comp_stream.accuracy())
