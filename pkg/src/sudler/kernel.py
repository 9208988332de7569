"""High-precision evaluation of Sudler products and their factorization.

Fractional parts {r*beta} come from the 128-bit fixed-point image of beta:
x_r = r * frac(beta) mod 2^128, computed exactly in two uint64 limbs.  The
signed distance to the nearest integer is formed in fixed point before
conversion to float, so every factor 2|sin(pi x_r)| is accurate to a few
ulps relative, even when x_r is close to an integer.

Sums of log factors are formed per chunk of 2^16 indices with math.fsum and
reduced left to right with a Neumaier accumulator.  Chunks may be evaluated
on a thread pool; the result does not depend on the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from .bounds import UNIT_ROUNDOFF, CompensatedSum, EvalWithBound, from_log
from .errors import BudgetExceeded, FactorizationUndefined
from .qcf import FRAC_BITS, MASK, ONE, QuadraticSurd, convergents, make_surd

CHUNK = 1 << 16
DEFAULT_BUDGET = 10**7

_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_HALF_HI = np.uint64(1 << 63)
_TWO_M64 = 2.0**-64
_TWO_M128 = 2.0**-128
_LOG2 = math.log(2.0)


def _limbs(x: int) -> tuple[np.uint64, np.uint64]:
    x &= MASK
    return np.uint64(x >> 64), np.uint64(x & 0xFFFFFFFFFFFFFFFF)


def mul_add_128(k: np.ndarray, c: int, base: int) -> tuple[np.ndarray, np.ndarray]:
    """(k * c + base) mod 2^128 as (hi, lo) uint64 limbs; requires k < 2^32."""
    c_hi, c_lo = _limbs(c)
    b_hi, b_lo = _limbs(base)
    c_lo0 = c_lo & _M32
    c_lo1 = c_lo >> _S32
    p0 = k * c_lo0
    p1 = k * c_lo1
    lo = p0 + (p1 << _S32)
    hi = k * c_hi + (p1 >> _S32) + (lo < p0).astype(np.uint64)
    lo2 = lo + b_lo
    hi = hi + b_hi + (lo2 < lo).astype(np.uint64)
    return hi, lo2


def signed_from_limbs(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    """Float image of ((x)) in (-1/2, 1/2] for fixed-point x = (hi, lo)."""
    neg = (hi > _HALF_HI) | ((hi == _HALF_HI) & (lo > 0))
    n_lo = ~lo + np.uint64(1)
    n_hi = ~hi + (n_lo == 0).astype(np.uint64)
    h = np.where(neg, n_hi, hi)
    l_ = np.where(neg, n_lo, lo)
    mag = h.astype(np.float64) * _TWO_M64 + l_.astype(np.float64) * _TWO_M128
    return np.where(neg, -mag, mag)


def signed_frac(x):
    """((x)): the representative of x mod 1 in (-1/2, 1/2]."""
    if isinstance(x, (Fraction, int)):
        return x - math.ceil(x - Fraction(1, 2))
    if isinstance(x, mpmath.mpf):
        return x - mpmath.ceil(x - mpmath.mpf(1) / 2)
    return x - math.ceil(x - 0.5)


def to_fixed(x) -> int:
    """Nearest integer to x * 2^128, reduced mod 2^128."""
    if isinstance(x, mpmath.mpf):
        with mpmath.workdps(80):
            return int(mpmath.nint(x * mpmath.mpf(2) ** FRAC_BITS)) & MASK
    return round(Fraction(x) * ONE) & MASK


@dataclass(frozen=True)
class FracState:
    """Running fixed-point value of {r*beta}; ``advance`` adds beta mod 1."""

    surd: QuadraticSurd
    r: int
    frac: int

    @classmethod
    def start(cls, surd: QuadraticSurd, r: int = 0) -> "FracState":
        return cls(surd, r, (r * surd.frac) & MASK)

    def advance(self, steps: int = 1) -> "FracState":
        return FracState(self.surd, self.r + steps, (self.frac + steps * self.surd.frac) & MASK)

    @property
    def value(self) -> float:
        return self.frac / ONE

    def error_bound(self) -> float:
        """|frac * 2^-128 - {r*beta}| <= (r + 1) * 2^-128."""
        return (self.r + 1) * _TWO_M128


def frac_stream(surd: QuadraticSurd, start: int, count: int, shift: int = 0):
    """(hi, lo) limbs of r*beta + shift*2^-128 mod 1 for r = start .. start+count-1."""
    if count > 1 << 32:
        raise ValueError("chunk too large for the 32-bit multiplier split")
    base = (start * surd.frac + shift) & MASK
    k = np.arange(count, dtype=np.uint64)
    return mul_add_128(k, surd.frac, base)


def _chunk_terms_surd(surd, start, count, shift):
    hi, lo = frac_stream(surd, start, count, shift)
    d = signed_from_limbs(hi, lo)
    s = np.abs(np.sin(np.pi * d))
    t = _LOG2 + np.log(s)
    r = np.arange(start, start + count, dtype=np.float64)
    # fixed-point drift is at most (r + 1) ulps of 2^-128 plus half an ulp of shift
    cot = np.abs(np.cos(np.pi * d)) / s
    err = math.pi * cot * (r + 2.0) * _TWO_M128 + 4 * UNIT_ROUNDOFF * (1.0 + np.abs(t))
    return t, err


def _chunk_terms_rational(m, n, start, count, shift_frac):
    r = np.arange(start, start + count, dtype=np.int64)
    if shift_frac:
        # shift enters as an exact rational with denominator n * den
        num, den = shift_frac.numerator, shift_frac.denominator
        res = (r * (m * den) + num * n) % (n * den)
        modulus = n * den
    else:
        res = (r * m) % n
        modulus = n
    if np.any(res == 0):
        return None, None
    res = np.where(2 * res > modulus, res - modulus, res)
    d = res.astype(np.float64) / modulus
    s = np.abs(np.sin(np.pi * d))
    t = _LOG2 + np.log(s)
    err = 4 * UNIT_ROUNDOFF * (1.0 + np.abs(t))
    return t, err


def _normalize_alpha(alpha):
    if isinstance(alpha, QuadraticSurd):
        return alpha
    if isinstance(alpha, (Fraction, int)):
        return Fraction(alpha)
    if isinstance(alpha, str):
        return Fraction(alpha)
    raise TypeError(
        "alpha must be a QuadraticSurd or an exact rational; floats carry no precision guarantee"
    )


def _log_sum(alpha, start, count, shift=0, threads=1):
    """Sum of log 2|sin pi(r*alpha + shift)| for r in [start, start + count).

    Returns (log_sum, log_err, zero).  ``shift`` is fixed-point for surds and a
    Fraction for rationals.
    """
    if count <= 0:
        return 0.0, 0.0, False
    chunks = [(s, min(CHUNK, start + count - s)) for s in range(start, start + count, CHUNK)]

    if isinstance(alpha, QuadraticSurd):
        def work(ch):
            t, e = _chunk_terms_surd(alpha, ch[0], ch[1], shift)
            return math.fsum(t), float(np.sum(e)), float(np.sum(np.abs(t))), False
    else:
        m, n = alpha.numerator % alpha.denominator, alpha.denominator
        sh = Fraction(shift) if shift else Fraction(0)

        def work(ch):
            t, e = _chunk_terms_rational(m, n, ch[0], ch[1], sh)
            if t is None:
                return 0.0, 0.0, 0.0, True
            return math.fsum(t), float(np.sum(e)), float(np.sum(np.abs(t))), False

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(ch) for ch in chunks]

    if any(p[3] for p in parts):
        return -math.inf, 0.0, True
    acc = CompensatedSum()
    term_err = 0.0
    for part_sum, part_err, _, _ in parts:
        acc.add(part_sum)
        term_err += part_err
    total = acc.value
    # fsum rounds each chunk once; the Neumaier pass adds O(u^2) per chunk
    reduce_err = UNIT_ROUNDOFF * sum(abs(p[0]) for p in parts) + 2 * UNIT_ROUNDOFF * abs(total)
    return total, term_err + reduce_err, False


def _check_budget(count, budget):
    if budget is not None and count > budget:
        raise BudgetExceeded(count, budget)


def sudler_product(alpha, N: int, *, budget: int | None = DEFAULT_BUDGET, threads: int = 1) -> EvalWithBound:
    """P_N(alpha) = prod_{r=1}^N 2|sin(pi r alpha)|.

    ``alpha`` is a QuadraticSurd or an exact rational (Fraction, int or
    'm/n' string).  A vanishing factor gives value 0 with ``is_zero`` set.
    """
    if N < 1:
        raise ValueError("N must be a positive integer")
    alpha = _normalize_alpha(alpha)
    _check_budget(N, budget)
    if isinstance(alpha, Fraction) and N >= alpha.denominator:
        return EvalWithBound(0.0, 0.0, -math.inf, 0.0, is_zero=True, info={"N": N})
    log_sum, log_err, zero = _log_sum(alpha, 1, N, threads=threads)
    if zero:
        return EvalWithBound(0.0, 0.0, -math.inf, 0.0, is_zero=True, info={"N": N})
    return from_log(log_sum, log_err, info={"N": N})


def range_product(surd: QuadraticSurd, start: int, count: int, shift=0, *,
                  budget: int | None = DEFAULT_BUDGET, threads: int = 1) -> EvalWithBound:
    """prod_{r=start}^{start+count-1} 2|sin pi(r beta + shift)|, shift real."""
    _check_budget(count, budget)
    log_sum, log_err, _ = _log_sum(surd, start, count, to_fixed(shift) if shift else 0, threads)
    return from_log(log_sum, log_err, info={"start": start, "count": count})


def block_index(b: int, n: int) -> int:
    """Map the public index n to the convergent index m with q_m the block length.

    For b = 1 the public index is Fibonacci (F_n = q_{n-1}); otherwise n = m.
    """
    return n - 1 if b == 1 else n


def perturbed_product(b: int, n: int, eps, *, budget: int | None = DEFAULT_BUDGET,
                      threads: int = 1) -> EvalWithBound:
    """prod_{r=1}^{q} 2|sin pi(r beta + sign * eps / q)|.

    For b >= 2: q = q_n and sign = (-1)^n.  For b = 1: q = F_n and
    sign = (-1)^(n+1).  Both reduce to sign (-1)^m with q = q_m.
    """
    m = block_index(b, n)
    if m < 0:
        raise ValueError("index too small")
    surd = make_surd(b)
    q = convergents(b, max(1, m))[m]
    _check_budget(q, budget)
    sign = -1 if m % 2 else 1
    shift = _scaled(eps, sign, q)
    log_sum, log_err, _ = _log_sum(surd, 1, q, to_fixed(shift), threads)
    # half an ulp of 2^-128 from rounding the shift, already covered by the (r + 2) drift term
    return from_log(log_sum, log_err, info={"b": b, "n": n, "q": q, "eps": float(eps)})


def _scaled(eps, sign, q):
    if isinstance(eps, mpmath.mpf):
        with mpmath.workdps(80):
            return sign * eps / q
    return Fraction(eps) * sign / q


def prefix_log_products(alpha, N: int, *, budget: int | None = DEFAULT_BUDGET):
    """Array of log P_k(alpha) for k = 1..N and a bound on each entry's error."""
    alpha = _normalize_alpha(alpha)
    _check_budget(N, budget)
    out = np.empty(N, dtype=np.float64)
    base = CompensatedSum()
    err_total = 0.0
    for s in range(1, N + 1, CHUNK):
        cnt = min(CHUNK, N + 1 - s)
        if isinstance(alpha, QuadraticSurd):
            t, e = _chunk_terms_surd(alpha, s, cnt, 0)
        else:
            t, e = _chunk_terms_rational(alpha.numerator, alpha.denominator, s, cnt, Fraction(0))
            if t is None:
                raise ValueError("a factor vanishes; prefix logs are undefined")
        partial = np.cumsum(t)
        out[s - 1: s - 1 + cnt] = base.value + partial
        # naive cumsum: each partial carries at most cnt roundings of its own size
        err_total += float(np.sum(e)) + cnt * UNIT_ROUNDOFF * float(np.max(np.abs(partial)))
        base.add(math.fsum(t))
    return out, err_total + UNIT_ROUNDOFF * float(np.max(np.abs(out)))


@dataclass(frozen=True)
class FactorTriple:
    """P_{q}(beta, eps) = A * B * C with the pieces of the pairing identity."""

    A: float
    B: float
    C: float
    n: int
    s0: float
    q: int

    @property
    def product(self) -> float:
        return self.A * self.B * self.C


def factor_triple(b: int, n: int, eps, *, budget: int | None = DEFAULT_BUDGET) -> FactorTriple:
    """A_n, B_n, C_n for the perturbed product at public index n (see perturbed_product)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    m = block_index(b, n)
    surd = make_surd(b)
    table = convergents(b, max(1, m))
    q = table[m]
    q_prev = table[m - 1] if m >= 1 else 0
    _check_budget(q, budget)
    eps_f = float(eps)
    with mpmath.workdps(40):
        small = float(surd.mp(40) ** (m + 1))  # beta^{m+1} = |q_m beta - q_{m-1}|

    sign = -1 if m % 2 else 1
    shift = to_fixed(_scaled(eps, sign, q))
    x = (q * surd.frac + shift) & MASK
    d = float(signed_from_limbs(*[np.array([v]) for v in _limbs(x)])[0])
    A = 2.0 * q * abs(math.sin(math.pi * d))

    s0 = 2.0 * math.sin(math.pi * (eps_f / q + small / 2.0))

    if q == 1:
        return FactorTriple(A=A, B=1.0, C=1.0, n=n, s0=s0, q=q)

    k = np.arange(1, q, dtype=np.int64)
    j = (k * q_prev) % q  # exact residues [q_{m-1} k] mod q_m
    delta = small * (j / q - 0.5)
    kk = np.minimum(k, q - k)
    # sin(pi(k/q - delta)) = sin(pi((q-k)/q + delta)) for the upper half
    arg = np.where(k <= q - k, kk / q - delta, kk / q + delta)
    s = 2.0 * np.sin(np.pi * arg)
    if np.any(s <= 0):
        raise FactorizationUndefined("s_n(r) changes sign; the pairing argument fails")
    base = 2.0 * np.sin(np.pi * kk / q)
    log_B = math.fsum(np.log(s) - np.log(base))
    ratio = (s0 / s) ** 2
    if np.any(ratio >= 1.0):
        raise FactorizationUndefined(
            f"s_n(r)^2 <= s_n(0, eps)^2 for some r at eps={eps_f}; C_n is undefined"
        )
    log_C = 0.5 * math.fsum(np.log1p(-ratio))
    return FactorTriple(A=A, B=math.exp(log_B), C=math.exp(log_C), n=n, s0=s0, q=q)
