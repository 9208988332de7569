"""Values paired with rigorous error bounds, and a compensated accumulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

UNIT_ROUNDOFF = 2.0**-53


@dataclass(frozen=True)
class EvalWithBound:
    """A computed real ``value`` with |true - value| <= ``abs_err``.

    ``log_value``/``log_err`` carry the same information in the log domain
    when the quantity was accumulated there.  ``is_zero`` flags an exact zero
    (a vanishing factor) or a root of a limit function.
    """

    value: float
    abs_err: float
    log_value: float | None = None
    log_err: float | None = None
    is_zero: bool = False
    info: dict = field(default_factory=dict, compare=False)

    @property
    def lo(self) -> float:
        return self.value - self.abs_err

    @property
    def hi(self) -> float:
        return self.value + self.abs_err

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def __float__(self) -> float:
        return float(self.value)


def from_log(log_value: float, log_err: float, **kw) -> EvalWithBound:
    """Exponentiate a log-domain result, converting the bound."""
    value = math.exp(log_value)
    abs_err = value * math.expm1(log_err) if log_err < 700 else math.inf
    # exp itself rounds
    abs_err += 2 * UNIT_ROUNDOFF * value
    return EvalWithBound(value, abs_err, log_value, log_err, **kw)


class CompensatedSum:
    """Neumaier's two-term running sum."""

    __slots__ = ("_s", "_c", "count")

    def __init__(self, start: float = 0.0):
        self._s = float(start)
        self._c = 0.0
        self.count = 0

    def add(self, x: float) -> None:
        s = self._s
        t = s + x
        if abs(s) >= abs(x):
            self._c += (s - t) + x
        else:
            self._c += (x - t) + s
        self._s = t
        self.count += 1

    def extend(self, xs) -> None:
        for x in xs:
            self.add(x)

    @property
    def value(self) -> float:
        return self._s + self._c
