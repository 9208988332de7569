"""Continued-fraction data for beta = [b, b, b, ...].

beta(b) = (sqrt(b^2 + 4) - b) / 2 is held exactly as a surd and as a
128-bit fixed-point image of its fractional part.  Convergent denominators
are plain Python integers, so no overflow is possible.

Fibonacci numbers use F_0 = 0, F_1 = 1.  For b = 1 the convergent
denominators are q_n = F_{n+1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath

from .errors import DigitRuleError

FRAC_BITS = 128
ONE = 1 << FRAC_BITS
MASK = ONE - 1


@dataclass(frozen=True)
class QuadraticSurd:
    """beta = (-b + sqrt(D)) / 2 with D = b^2 + 4.

    ``frac`` is floor(beta * 2^128); the true value lies in
    [frac, frac + 1) * 2^-128.
    """

    b: int
    disc: int
    frac: int

    @property
    def value(self) -> float:
        return self.frac / ONE

    @property
    def sqrt_disc(self) -> float:
        return math.sqrt(self.disc)

    @property
    def exact(self) -> tuple[int, int, int, int]:
        """(integer part, coefficient of sqrt(D), D, denominator)."""
        return (-self.b, 1, self.disc, 2)

    def mp(self, dps: int = 50) -> mpmath.mpf:
        with mpmath.workdps(dps):
            return (mpmath.sqrt(self.disc) - self.b) / 2

    def sqrt_disc_mp(self, dps: int = 50) -> mpmath.mpf:
        with mpmath.workdps(dps):
            return mpmath.sqrt(self.disc)

    def frac_of_multiple(self, r: int) -> int:
        """Exact floor({r*beta} * 2^128) via integer square roots."""
        if r < 0:
            raise ValueError("r must be non-negative")
        # 2^128 * r * beta = (2^128 r sqrt(D) - 2^128 r b) / 2
        root = math.isqrt(r * r * self.disc << (2 * FRAC_BITS))
        return ((root - (r * self.b << FRAC_BITS)) >> 1) & MASK

    def residual(self) -> float:
        """beta^2 + b*beta - 1 evaluated on the fixed-point image."""
        x = self.frac
        # exact integer arithmetic, scaled by 2^256
        num = x * x + self.b * x * ONE - ONE * ONE
        return num / (ONE * ONE)


def make_surd(b: int) -> QuadraticSurd:
    if not isinstance(b, int) or isinstance(b, bool) or b < 1:
        raise ValueError(f"b must be a positive integer, got {b!r}")
    return _make_surd(b)


@lru_cache(maxsize=None)
def _make_surd(b: int) -> QuadraticSurd:
    disc = b * b + 4
    root = math.isqrt(disc << (2 * FRAC_BITS))
    frac = (root - (b << FRAC_BITS)) >> 1
    return QuadraticSurd(b=b, disc=disc, frac=frac)


@dataclass(frozen=True)
class ConvergentTable:
    b: int
    q: tuple[int, ...]

    @property
    def n_max(self) -> int:
        return len(self.q) - 1

    def __getitem__(self, n: int) -> int:
        return self.q[n]

    def closed_form(self, n: int, dps: int = 60) -> mpmath.mpf:
        """(beta^-(n+1) - (-beta)^(n+1)) / sqrt(b^2 + 4)."""
        surd = make_surd(self.b)
        with mpmath.workdps(dps):
            beta = surd.mp(dps)
            return (beta ** -(n + 1) - (-beta) ** (n + 1)) / mpmath.sqrt(surd.disc)

    def fibonacci(self, n: int) -> int:
        if self.b != 1:
            raise ValueError("Fibonacci indexing only applies to b = 1")
        return 0 if n == 0 else self.q[n - 1]


def convergents(b: int, n_max: int) -> ConvergentTable:
    make_surd(b)
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    return _convergents(b, n_max)


@lru_cache(maxsize=64)
def _convergents(b: int, n_max: int) -> ConvergentTable:
    q = [1, b]
    while len(q) <= n_max:
        q.append(b * q[-1] + q[-2])
    return ConvergentTable(b=b, q=tuple(q[: n_max + 1]))


def convergents_upto(b: int, limit: int) -> ConvergentTable:
    """Smallest table whose last denominator exceeds ``limit``."""
    n = 1
    q_prev, q_cur = 1, b
    while q_cur <= limit:
        q_prev, q_cur = q_cur, b * q_cur + q_prev
        n += 1
    return convergents(b, n)


def fibonacci(n: int) -> int:
    if n < 0:
        raise ValueError("n must be non-negative")
    a, c = 0, 1
    for _ in range(n):
        a, c = c, a + c
    return a


@dataclass(frozen=True)
class OstrowskiDigits:
    """digits[i] is c_{i+1}, the coefficient of q_i."""

    b: int
    digits: tuple[int, ...]
    value: int

    @property
    def top(self) -> int:
        """Index n of the highest denominator q_n carrying a nonzero digit."""
        for i in range(len(self.digits) - 1, -1, -1):
            if self.digits[i]:
                return i
        return -1

    def c(self, i: int) -> int:
        """c_i with 1-based indexing; zero beyond the stored digits."""
        if i < 1:
            raise IndexError(i)
        return self.digits[i - 1] if i <= len(self.digits) else 0

    def terms(self) -> list[tuple[int, int, int]]:
        """(digit, index, q_index) for every nonzero digit, highest first."""
        table = convergents(self.b, max(1, len(self.digits)))
        return [(c, i, table[i]) for i, c in reversed(list(enumerate(self.digits))) if c]


def check_digits(digits, b: int) -> None:
    """Raise DigitRuleError naming the first violated rule."""
    digits = tuple(digits)
    if not digits:
        raise ValueError("empty digit sequence")
    if not 0 <= digits[0] < b:
        raise DigitRuleError(1, 1, f"need 0 <= c_1 < {b}, got {digits[0]}")
    for k in range(1, len(digits)):
        if not 0 <= digits[k] <= b:
            raise DigitRuleError(2, k + 1, f"need 0 <= c_{k + 1} <= {b}, got {digits[k]}")
    for k in range(1, len(digits)):
        if digits[k] == b and digits[k - 1] != 0:
            raise DigitRuleError(
                3, k, f"c_{k + 1} = {b} forces c_{k} = 0, got {digits[k - 1]}"
            )


def ostrowski_value(d: OstrowskiDigits | tuple | list, b: int | None = None) -> int:
    if isinstance(d, OstrowskiDigits):
        b, digits = d.b, d.digits
    else:
        if b is None:
            raise ValueError("b is required for a bare digit sequence")
        digits = tuple(d)
    check_digits(digits, b)
    table = convergents(b, max(1, len(digits)))
    return sum(c * table[i] for i, c in enumerate(digits))


def ostrowski_expand(N: int, b: int) -> OstrowskiDigits:
    """Greedy top-down Ostrowski expansion of N >= 1 for beta(b)."""
    if N < 1:
        raise ValueError("N must be a positive integer")
    make_surd(b)
    table = convergents_upto(b, N)
    n = max(i for i, q in enumerate(table.q) if q <= N)
    digits = [0] * (n + 1)
    rest = N
    for i in range(n, -1, -1):
        c, rest = divmod(rest, table[i])
        digits[i] = c
    # b = 1 has q_0 = q_1 = 1; the greedy pass already leaves c_1 = 0
    return OstrowskiDigits(b=b, digits=tuple(digits), value=N)


@dataclass(frozen=True)
class ZeckendorffIndices:
    """N = sum of F_i over ``indices`` (ascending, gaps >= 2, smallest >= 2)."""

    indices: tuple[int, ...]
    value: int


def zeckendorff_expand(N: int) -> ZeckendorffIndices:
    if N < 1:
        raise ValueError("N must be a positive integer")
    fib = [0, 1]
    while fib[-1] <= N:
        fib.append(fib[-1] + fib[-2])
    out = []
    rest = N
    for i in range(len(fib) - 1, 1, -1):
        if fib[i] <= rest:
            out.append(i)
            rest -= fib[i]
    return ZeckendorffIndices(indices=tuple(reversed(out)), value=N)


def zeckendorff_from_ostrowski(d: OstrowskiDigits) -> ZeckendorffIndices:
    if d.b != 1:
        raise ValueError("only b = 1 digits map to Zeckendorff indices")
    return ZeckendorffIndices(
        indices=tuple(i + 1 for i, c in enumerate(d.digits) if c), value=d.value
    )
