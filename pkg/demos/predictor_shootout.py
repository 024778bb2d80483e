#!/usr/bin/env python3
"""Race every predictor preset over three probe streams: a short periodic
pattern, an XOR of two recent history bits, and a fixed-trip loop. Shows
which table designs learn which structure.

Run from the repository root:

    python3 demos/predictor_shootout.py
"""

import random

from branchlab.predictors import PRESET_NAMES, estimate_storage, make_predictor, simulate
from branchlab.records import BranchKind, BranchRecord

TARGET = 0x300


def cond(seq, ip, taken):
    return BranchRecord(seq, ip, BranchKind.COND, ip + 4, taken)


def periodic_stream(n=20_000):
    pattern = [c == "T" for c in "TTNTNNT"]
    return [cond(i, TARGET, pattern[i % 7]) for i in range(n)]


def xor_stream(n=6_000, seed=1):
    # two coin flips, then their XOR: linearly inseparable over history
    rng = random.Random(seed)
    rows = []
    for i in range(n):
        a = rng.random() < 0.5
        b = rng.random() < 0.5
        rows.append(cond(3 * i, 0x200, a))
        rows.append(cond(3 * i + 1, 0x210, b))
        rows.append(cond(3 * i + 2, TARGET, a ^ b))
    return rows


def loop_stream(trip=37, instances=600):
    rows = []
    seq = 0
    for _ in range(instances):
        for i in range(trip):
            rows.append(cond(seq, TARGET, i != trip - 1))
            seq += 1
    return rows


def tail_accuracy(rows, preset):
    stream = simulate(rows, make_predictor(preset))
    target = [r for r in stream.records if r.ip == TARGET]
    tail = target[len(target) // 2:]
    return sum(r.predicted == r.actual for r in tail) / len(tail)


def main() -> None:
    streams = {
        "periodic-7": periodic_stream(),
        "xor-2bit": xor_stream(),
        "loop-37": loop_stream(),
    }
    presets = [p for p in PRESET_NAMES if p != "always-taken"] + ["tage:64kb"]
    print(f"{'preset':16s} {'bytes':>7s}  " + "  ".join(f"{n:>10s}" for n in streams))
    for preset in presets:
        row = [tail_accuracy(rows, preset) for rows in streams.values()]
        size = estimate_storage(preset)
        print(f"{preset:16s} {size:7d}  " + "  ".join(f"{acc:10.4f}" for acc in row))


if __name__ == "__main__":
    main()
