from __future__ import annotations

import math
from dataclasses import dataclass

SIGMA_FLOOR = 1e-8


@dataclass
class RewardNormalizer:
    """Divides rewards by a running (sample) standard deviation.

    Statistics are updated with every reward before it is scaled. Until
    ``warmup`` rewards have been seen the input passes through unchanged.
    A constant stream has zero spread and the divisor falls to
    ``SIGMA_FLOOR``; scaled outputs are then clipped to ``max_output``
    (``None`` disables the clip).
    """

    warmup: int = 100
    max_output: float | None = 100.0
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def update(self, r: float) -> None:
        # Welford
        self.count += 1
        delta = r - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (r - self.mean)
        if self.m2 < 0.0:
            self.m2 = 0.0

    @property
    def std(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self.m2 / (self.count - 1))

    @property
    def divisor(self) -> float:
        return max(self.std, SIGMA_FLOOR)

    def __call__(self, r: float) -> float:
        return normalize_reward(self, r)


def normalize_reward(norm: RewardNormalizer, r_raw: float) -> float:
    if not math.isfinite(r_raw):
        raise ValueError("reward must be finite")
    norm.update(r_raw)
    if norm.count < norm.warmup:
        return r_raw
    out = r_raw / norm.divisor
    if norm.max_output is not None:
        out = min(max(out, -norm.max_output), norm.max_output)
    return out
