"""Statistical corrector: a perceptron-style arbiter over the TAGE output.

Five signed contributions are summed: the TAGE vote scaled by its
confidence, a per-ip bias weight, and dot products of three small weight
vectors against fixed global-history windows (8, 16, 32 bits). When the
sum disagrees in sign with TAGE and clears a dynamically trained
threshold, the corrector's direction wins. With all weights zero the sum
is exactly the scaled TAGE vote, so a fresh corrector can never override.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError
from .base import clamp

WINDOWS = (8, 16, 32)


@dataclass(frozen=True)
class CorrectorConfig:
    bias_entries: int = 1024
    vector_rows: int = 16
    weight_bits: int = 6
    theta_init: int = 6
    theta_min: int = 1
    theta_max: int = 63

    def validate(self) -> None:
        for n, what in ((self.bias_entries, "bias_entries"), (self.vector_rows, "vector_rows")):
            if n < 1 or n & (n - 1):
                raise ConfigError(f"{what} must be a power of two, got {n}")
        if self.weight_bits < 2:
            raise ConfigError(f"weight_bits must be >= 2, got {self.weight_bits}")
        if not (self.theta_min <= self.theta_init <= self.theta_max):
            raise ConfigError("theta_init outside [theta_min, theta_max]")

    def storage_bytes(self) -> int:
        bits = self.bias_entries * self.weight_bits
        bits += sum(WINDOWS) * self.vector_rows * self.weight_bits
        return bits // 8


@dataclass(frozen=True, slots=True)
class ScDecision:
    taken: bool
    conf: int
    overrode: bool
    total: int


class StatisticalCorrector:
    def __init__(self, config: CorrectorConfig | None = None):
        cfg = config if config is not None else CorrectorConfig()
        cfg.validate()
        self.config = cfg
        self._wmin = -(1 << (cfg.weight_bits - 1))
        self._wmax = (1 << (cfg.weight_bits - 1)) - 1
        self.bias = [0] * cfg.bias_entries
        self.vectors = [[[0] * w for _ in range(cfg.vector_rows)] for w in WINDOWS]
        self.theta = cfg.theta_init

    def _rows(self, ip: int) -> tuple[int, ...]:
        pc = ip >> 2
        mask = self.config.vector_rows - 1
        # decorrelate the three banks with different pc shears
        return tuple((pc ^ (pc >> (3 + k))) & mask for k in range(len(WINDOWS)))

    def _sum(self, ip: int, tage_taken: bool, tage_conf: int, history_bits: int) -> int:
        total = (1 if tage_taken else -1) * (2 * tage_conf + 1) * 2
        total += self.bias[(ip >> 2) & (self.config.bias_entries - 1)]
        rows = self._rows(ip)
        for k, w in enumerate(WINDOWS):
            vec = self.vectors[k][rows[k]]
            for j in range(w):
                if (history_bits >> j) & 1:
                    total += vec[j]
                else:
                    total -= vec[j]
        return total

    def adjust(self, ip: int, tage_taken: bool, tage_conf: int, history_bits: int) -> ScDecision:
        """Pure arbitration; ``history_bits`` carries the most recent
        direction outcomes with bit 0 newest."""
        total = self._sum(ip, tage_taken, tage_conf, history_bits)
        sc_taken = total >= 0
        if sc_taken != tage_taken and abs(total) > self.theta:
            return ScDecision(sc_taken, min(3, abs(total) // (2 * self.theta)), True, total)
        return ScDecision(tage_taken, tage_conf, False, total)

    def train(self, ip: int, tage_taken: bool, history_bits: int,
              decision: ScDecision, outcome: bool) -> None:
        """Weight/threshold update for one outcome; ``decision`` must be the
        adjust() result computed against the same pre-branch history."""
        total = decision.total
        sc_taken = total >= 0
        # dynamic threshold adapts on TAGE/SC disagreements
        if sc_taken != tage_taken:
            if sc_taken == outcome and abs(total) <= self.theta:
                self.theta = max(self.config.theta_min, self.theta - 1)
            elif sc_taken != outcome and abs(total) > self.theta:
                self.theta = min(self.config.theta_max, self.theta + 1)
        if decision.taken == outcome and abs(total) > self.theta:
            return
        t = 1 if outcome else -1
        b = (ip >> 2) & (self.config.bias_entries - 1)
        self.bias[b] = clamp(self.bias[b] + t, self._wmin, self._wmax)
        rows = self._rows(ip)
        for k, w in enumerate(WINDOWS):
            vec = self.vectors[k][rows[k]]
            for j in range(w):
                x = 1 if (history_bits >> j) & 1 else -1
                nw = vec[j] + t * x
                if self._wmin <= nw <= self._wmax:
                    vec[j] = nw

    def storage_bytes(self) -> int:
        return self.config.storage_bytes()
