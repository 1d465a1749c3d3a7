"""Scalars stored as sign and natural-log magnitude."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class LogScale:
    """A real number ``sign * exp(log)``.

    Products of many bound factors overflow doubles quickly, so bounds and
    scale corrections are carried in this form.  Zero is ``sign == 0``.
    """

    log: float
    sign: int = 1

    @classmethod
    def from_value(cls, x: float) -> LogScale:
        if x == 0:
            return cls(-math.inf, 0)
        return cls(math.log(abs(x)), 1 if x > 0 else -1)

    @classmethod
    def zero(cls) -> LogScale:
        return cls(-math.inf, 0)

    @classmethod
    def one(cls) -> LogScale:
        return cls(0.0, 1)

    @property
    def value(self) -> float:
        """Plain float, ``inf`` when the magnitude is not representable."""
        if self.sign == 0:
            return 0.0
        try:
            return self.sign * math.exp(self.log)
        except OverflowError:
            return self.sign * math.inf

    def is_zero(self) -> bool:
        return self.sign == 0

    def __mul__(self, other: LogScale | float) -> LogScale:
        if not isinstance(other, LogScale):
            other = LogScale.from_value(float(other))
        if self.sign == 0 or other.sign == 0:
            return LogScale.zero()
        return LogScale(self.log + other.log, self.sign * other.sign)

    __rmul__ = __mul__

    def __truediv__(self, other: LogScale | float) -> LogScale:
        if not isinstance(other, LogScale):
            other = LogScale.from_value(float(other))
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero LogScale")
        if self.sign == 0:
            return LogScale.zero()
        return LogScale(self.log - other.log, self.sign * other.sign)

    def to_dict(self) -> dict:
        return {"log": self.log if self.sign else None, "sign": self.sign}
