"""Time-discounted pairwise trust: the base ``q``, trust rank and weight of trust."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import timedelta
from typing import Callable, Sequence

from .ingest import INTERVAL_ALIASES

CREDIT_FUNCTIONS: dict[str, Callable[[float], float]] = {
    "identity": lambda c: c,
    "log1p": math.log1p,
}


def compute_q(t: float) -> float:
    """Discount base such that an evaluation's weight halves every ``t`` intervals."""
    if not t > 0:
        raise ValueError(f"half-life must be positive, got {t}")
    return 2.0 ** (1.0 / t)


@dataclass
class EngineConfig:
    scale_max: float = 3.0
    half_life: float = 2.0
    interval_width: timedelta = field(default_factory=lambda: INTERVAL_ALIASES["half-year"])
    credit_fn: str = "identity"
    consensus: str = "pair"  # "pair" | "flat"
    fairness: str = "literal"  # "literal" | "complement"

    def __post_init__(self):
        if not self.scale_max > 0:
            raise ValueError("scale_max must be positive")
        if self.credit_fn not in CREDIT_FUNCTIONS:
            raise ValueError(f"unknown credit function {self.credit_fn!r}")
        if self.consensus not in ("pair", "flat"):
            raise ValueError(f"unknown consensus mode {self.consensus!r}")
        if self.fairness not in ("literal", "complement"):
            raise ValueError(f"unknown fairness mode {self.fairness!r}")
        compute_q(self.half_life)

    @property
    def q(self) -> float:
        return compute_q(self.half_life)

    @property
    def h(self) -> Callable[[float], float]:
        return CREDIT_FUNCTIONS[self.credit_fn]

    def echo(self) -> dict:
        return {
            "scale_max": self.scale_max,
            "half_life": self.half_life,
            "q": self.q,
            "interval_width_seconds": self.interval_width.total_seconds(),
            "credit_fn": self.credit_fn,
            "consensus": self.consensus,
            "fairness": self.fairness,
        }


def trust_rank(sequence: Sequence[tuple], q: float) -> float:
    """Weighted mean of evaluation values with weights ``q ** label``.

    ``sequence`` holds ``(label, value)`` or ``(label, value, credit)`` tuples;
    credits play no part here. Weights are taken relative to the newest label.
    """
    if not sequence:
        raise ValueError("trust rank of an empty sequence is undefined")
    if q < 1:
        raise ValueError("q must be >= 1")
    newest = max(item[0] for item in sequence)
    num = den = 0.0
    lo = hi = sequence[0][1]
    for item in sequence:
        label, value = item[0], item[1]
        w = q ** (label - newest)
        num += value * w
        den += w
        lo, hi = min(lo, value), max(hi, value)
    # rounding can push the mean one ulp outside [min, max]
    return min(max(num / den, lo), hi)


def trust_weight(sequence: Sequence[tuple], horizon: int, q: float, h: Callable[[float], float] = CREDIT_FUNCTIONS["identity"]) -> float:
    """Time-discounted, credit-scaled evidence mass of ``(label, value, credit)`` tuples as of ``horizon``."""
    total = 0.0
    for label, _value, credit in sequence:
        if label > horizon:
            raise ValueError(f"evaluation at label {label} lies beyond horizon {horizon}")
        total += q ** (label - horizon) * h(credit)
    return total
