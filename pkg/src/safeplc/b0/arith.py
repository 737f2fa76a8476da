"""Integer semantics shared by the interpreter, the backends and the prover.

Division truncates toward zero and ``mod`` takes the sign of the dividend,
so ``a == b * (a div b) + a mod b`` whenever ``b /= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass


def tdiv(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def tmod(a: int, b: int) -> int:
    return a - b * tdiv(a, b)


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def is_const(self) -> bool:
        return self.lo == self.hi

    def __contains__(self, v: int) -> bool:
        return self.lo <= v <= self.hi

    def within(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def meet(self, other: "Interval"):
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else None

    def join(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))


def add(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo + b.lo, a.hi + b.hi)


def sub(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo - b.hi, a.hi - b.lo)


def mul(a: Interval, b: Interval) -> Interval:
    c = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return Interval(min(c), max(c))


def neg(a: Interval) -> Interval:
    return Interval(-a.hi, -a.lo)


def div(a: Interval, b: Interval) -> Interval:
    """Bound of ``a div b`` over all non-zero divisors in ``b``.  If ``b``
    is exactly zero the totalised value 0 is returned."""
    if b.lo == b.hi == 0:
        return Interval(0, 0)
    if b.lo > 0 or b.hi < 0:
        # truncated division is monotone in each argument on each sign side
        c = [tdiv(x, y) for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
        if a.lo < 0 < a.hi:
            c.append(0)
        return Interval(min(c), max(c))
    m = max(abs(a.lo), abs(a.hi))
    return Interval(-m, m)


def mod(a: Interval, b: Interval) -> Interval:
    """Bound of ``a mod b``; a zero divisor yields the dividend (totalised)."""
    if b.lo == b.hi == 0:
        return a.join(Interval(0, 0))
    if b.lo > 0 or b.hi < 0:
        mn = min(abs(b.lo), abs(b.hi))
        if 0 <= a.lo and a.hi < mn:
            return a
        if -mn < a.lo and a.hi <= 0:
            return a
    m = max(abs(b.lo), abs(b.hi)) - 1
    lo = 0 if a.lo >= 0 else max(a.lo, -m)
    hi = 0 if a.hi <= 0 else min(a.hi, m)
    if b.lo <= 0 <= b.hi:
        # a zero divisor totalises to the dividend
        lo, hi = min(lo, a.lo), max(hi, a.hi)
    return Interval(lo, hi)


ARITH = {"+": add, "-": sub, "*": mul, "div": div, "mod": mod}
