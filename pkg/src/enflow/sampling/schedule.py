"""Guidance strength lambda_t = a (1 - t)^2 and its per-dataset defaults"""

import bisect
import logging
import math
from dataclasses import dataclass

from enflow.errors import ConfigError

# amplitude a by number of Euler steps
DEFAULT_AMPLITUDES: dict[str, dict[int, float]] = {
    "drugs": {1: 0.5, 2: 0.3, 5: 0.2, 50: 0.1},
    "qm9": {1: 0.4, 2: 0.3, 5: 0.2, 50: 0.1},
}
FALLBACK_TAG = "drugs"


@dataclass(frozen=True)
class GuidanceSchedule:
    """Quadratic decay to zero at t = 1"""

    amplitude: float

    def __post_init__(self) -> None:
        if not self.amplitude >= 0 or not math.isfinite(self.amplitude):
            raise ConfigError(f"Guidance amplitude must be finite and non-negative, got {self.amplitude}")

    def lam(self, t: float) -> float:
        """lambda_t"""
        return self.amplitude * (1.0 - t) ** 2

    def __call__(self, t: float) -> float:
        return self.lam(t)


def default_schedule(dataset_tag: str, n_steps: int) -> GuidanceSchedule:
    """
    Tabulated amplitude for the step count, interpolated linearly in log N
    between table entries and held constant outside the table.
    """
    if n_steps < 1:
        raise ConfigError(f"n_steps must be at least 1, got {n_steps}")
    table = DEFAULT_AMPLITUDES.get(dataset_tag.lower())
    if table is None:
        logging.getLogger("Schedule").warning(
            "No guidance table for '%s', using the '%s' table", dataset_tag, FALLBACK_TAG
        )
        table = DEFAULT_AMPLITUDES[FALLBACK_TAG]

    steps = sorted(table)
    if n_steps in table:
        return GuidanceSchedule(table[n_steps])
    if n_steps <= steps[0]:
        return GuidanceSchedule(table[steps[0]])
    if n_steps >= steps[-1]:
        return GuidanceSchedule(table[steps[-1]])

    upper = bisect.bisect_left(steps, n_steps)
    lo, hi = steps[upper - 1], steps[upper]
    w = (math.log(n_steps) - math.log(lo)) / (math.log(hi) - math.log(lo))
    return GuidanceSchedule((1.0 - w) * table[lo] + w * table[hi])
