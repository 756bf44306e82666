"""Numbers of the form ``mantissa * exp(shift / eps)``.

Capacities and transition times at small noise span hundreds of orders of
magnitude.  Keeping the exponential part as an energy ``shift`` (divided by
``eps`` only when a float is finally needed) keeps every product and ratio
in floating range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

MANTISSA_BAND = (1e-3, 1e3)
_TINY = 1e-300


@dataclass(frozen=True)
class ScaledValue:
    mantissa: float
    shift: float = 0.0
    #: number of terms dropped because they underflowed relative to the sum
    dropped: int = 0

    def __post_init__(self):
        m = float(self.mantissa)
        if not (math.isfinite(m) and m >= 0.0):
            raise ValueError(f"mantissa must be finite and nonnegative, got {m}")
        if not math.isfinite(self.shift):
            raise ValueError("shift must be finite")

    def log_value(self, eps: float) -> float:
        if self.mantissa == 0.0:
            return -math.inf
        return math.log(self.mantissa) + self.shift / eps

    def value_at(self, eps: float) -> float:
        """Plain float, or ``inf`` when it overflows."""
        lv = self.log_value(eps)
        if lv > 709.0:
            return math.inf
        return math.exp(lv)

    def normalized(self, eps: float) -> "ScaledValue":
        """Move log-mass into the shift until the mantissa is inside the band."""
        m = self.mantissa
        lo, hi = MANTISSA_BAND
        if m == 0.0 or lo <= m <= hi:
            return self
        return replace(self, mantissa=1.0, shift=self.shift + eps * math.log(m))

    def to_dict(self, eps: float | None = None) -> dict:
        d = {"mantissa": self.mantissa, "shift": self.shift}
        if eps is not None:
            v = self.value_at(eps)
            d["value_at_eps"] = v if math.isfinite(v) else None
            d["log_value"] = self.log_value(eps)
        return d


def _ordered(a: ScaledValue, b: ScaledValue) -> tuple[ScaledValue, ScaledValue]:
    # a canonical order makes a+b and b+a bitwise identical
    return (a, b) if (a.shift, a.mantissa) >= (b.shift, b.mantissa) else (b, a)


def scaled_add(a: ScaledValue, b: ScaledValue, eps: float) -> ScaledValue:
    if eps <= 0:
        raise ValueError("eps must be positive")
    hi, lo = _ordered(a, b)
    dropped = a.dropped + b.dropped
    if lo.mantissa == 0.0:
        return replace(hi, dropped=dropped).normalized(eps)
    if hi.mantissa == 0.0:
        return replace(lo, dropped=dropped).normalized(eps)
    expo = (lo.shift - hi.shift) / eps
    rel = math.log(lo.mantissa) - math.log(hi.mantissa) + expo
    if rel < math.log(_TINY):
        return ScaledValue(hi.mantissa, hi.shift, dropped + 1).normalized(eps)
    m = hi.mantissa + lo.mantissa * math.exp(expo)
    return ScaledValue(m, hi.shift, dropped).normalized(eps)


def scaled_sum(values: Iterable[ScaledValue], eps: float) -> ScaledValue:
    values = list(values)
    if not values:
        return ScaledValue(0.0, 0.0)
    out = values[0]
    for v in values[1:]:
        out = scaled_add(out, v, eps)
    return out


def scaled_mul(a: ScaledValue, b: ScaledValue, eps: float) -> ScaledValue:
    m = a.mantissa * b.mantissa
    return ScaledValue(m, a.shift + b.shift, a.dropped + b.dropped).normalized(eps)


def scaled_div(a: ScaledValue, b: ScaledValue, eps: float) -> ScaledValue:
    if b.mantissa == 0.0:
        raise ZeroDivisionError("division by a zero ScaledValue")
    m = a.mantissa / b.mantissa
    return ScaledValue(m, a.shift - b.shift, a.dropped + b.dropped).normalized(eps)


def scaled_inv(a: ScaledValue, eps: float) -> ScaledValue:
    if a.mantissa == 0.0:
        raise ZeroDivisionError("inverse of a zero ScaledValue")
    return ScaledValue(1.0 / a.mantissa, -a.shift, a.dropped).normalized(eps)


def scaled_scale(a: ScaledValue, c: float, eps: float) -> ScaledValue:
    """Multiply by a plain positive float."""
    if c < 0:
        raise ValueError("scale factor must be nonnegative")
    return ScaledValue(a.mantissa * c, a.shift, a.dropped).normalized(eps)


def scaled_ratio(a: ScaledValue, b: ScaledValue, eps: float) -> float:
    """Plain float ``a / b`` computed in log space."""
    return math.exp(a.log_value(eps) - b.log_value(eps))
